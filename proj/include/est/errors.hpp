#pragma once

#include <stdexcept>

namespace est {

/// Shape mismatch between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// API used outside its contract (non-scalar loss, stepping an unreset model, ...).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A NaN or Inf was produced while finite checks were enabled.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model, task, or experiment configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Missing or malformed input data (IDX files, dataset exports, results stores).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input longer than a model's fixed capacity (transformer max_len).
class CapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

} // namespace est
