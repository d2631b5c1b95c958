#pragma once

// AdamW with bias-corrected moments and decoupled weight decay:
//     p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)

#include "est/tensor.hpp"

#include <vector>

namespace est {

struct AdamWOptions {
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamW {
public:
    AdamW(std::vector<Tensor> params, AdamWOptions options);

    /// One update from the gradients currently stored on the parameters.
    void step();
    void zero_grad();

    [[nodiscard]] std::size_t steps_taken() const { return t_; }
    [[nodiscard]] const AdamWOptions& options() const { return options_; }
    [[nodiscard]] const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    AdamWOptions options_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

/// Global L2 norm of all gradients.
[[nodiscard]] double global_grad_norm(const std::vector<Tensor>& params);
/// Rescales gradients so their global norm is at most max_norm; returns the
/// norm before clipping.
double clip_grad_norm(std::vector<Tensor>& params, double max_norm);

} // namespace est
