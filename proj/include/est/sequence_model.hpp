#pragma once

// Common contract for every trainable sequence model (EST and baselines): map a
// [T x input_dim] token matrix to [T x output_dim] predictions, expose named
// trainable tensors, and describe itself for checkpoints.

#include "est/tensor.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace est {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

class SequenceModel {
public:
    virtual ~SequenceModel() = default;

    [[nodiscard]] virtual std::string family() const = 0;
    [[nodiscard]] virtual std::size_t input_dim() const = 0;
    [[nodiscard]] virtual std::size_t output_dim() const = 0;

    /// Predictions for every position; position t depends only on tokens 0..t.
    virtual Tensor forward_sequence(const Tensor& tokens) = 0;

    /// Trainable tensors, in a stable order.
    [[nodiscard]] virtual std::vector<NamedTensor> named_parameters() const = 0;
    /// Fixed tensors that are part of the model but never trained.
    [[nodiscard]] virtual std::vector<NamedTensor> named_buffers() const { return {}; }

    /// Architecture description including "family", enough to rebuild the model.
    [[nodiscard]] virtual nlohmann::json config_json() const = 0;

    [[nodiscard]] std::vector<Tensor> parameters() const;
    /// Number of trainable scalars.
    [[nodiscard]] std::size_t count_parameters() const;
};

/// Models that consume one token per step and carry a recurrent state.
class RecurrentModel : public SequenceModel {
public:
    /// Zeroes the recurrent state; must precede forward_step.
    virtual void reset_state() = 0;
    [[nodiscard]] virtual bool has_state() const = 0;
    /// [1 x input_dim] -> [1 x output_dim], advancing the state.
    virtual Tensor forward_step(const Tensor& token) = 0;

    /// Resets the state and unrolls forward_step over all rows of `tokens`.
    Tensor forward_sequence(const Tensor& tokens) override;
};

} // namespace est
