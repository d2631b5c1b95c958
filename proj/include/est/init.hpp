#pragma once

#include "est/rng.hpp"
#include "est/tensor.hpp"

#include <cmath>
#include <vector>

namespace est {

/// Trainable [rows x cols] leaf with entries uniform in [-bound, bound].
inline Tensor uniform_parameter(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) {
        x = uniform(rng, -bound, bound);
    }
    return Tensor::from(rows, cols, std::move(v), true);
}

/// Fan-in scaled initialisation, bound 1/sqrt(fan_in).
inline Tensor fan_in_parameter(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    return uniform_parameter(fan_in, fan_out, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

inline Tensor zero_parameter(std::size_t rows, std::size_t cols) { return Tensor::zeros(rows, cols, true); }

} // namespace est
