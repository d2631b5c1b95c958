#include "est/training/optimizer.hpp"

#include <cmath>

#include <fmt/format.h>

namespace est {

AdamW::AdamW(std::vector<Tensor> params, AdamWOptions options) : params_(std::move(params)), options_(options) {
    if (!(options_.learning_rate > 0.0)) {
        throw ConfigError(fmt::format("AdamW: learning rate must be positive, got {}", options_.learning_rate));
    }
    if (options_.weight_decay < 0.0) {
        throw ConfigError("AdamW: weight decay must be non-negative");
    }
    for (const auto& p : params_) {
        if (!p.requires_grad()) {
            throw UsageError("AdamW: every parameter must require gradients");
        }
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void AdamW::step() {
    ++t_;
    const auto& o = options_;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto value = params_[k].mutable_data();
        const auto grad = params_[k].grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * grad[i];
            v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            value[i] -= o.learning_rate * (m_hat / (std::sqrt(v_hat) + o.eps) + o.weight_decay * value[i]);
        }
    }
}

void AdamW::zero_grad() {
    for (auto& p : params_) {
        p.zero_grad();
    }
}

double global_grad_norm(const std::vector<Tensor>& params) {
    double total = 0.0;
    for (const auto& p : params) {
        for (double g : p.grad()) {
            total += g * g;
        }
    }
    return std::sqrt(total);
}

double clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
    const double norm = global_grad_norm(params);
    if (norm > max_norm && std::isfinite(norm)) {
        const double factor = max_norm / norm;
        for (auto& p : params) {
            for (auto& g : p.mutable_grad()) {
                g *= factor;
            }
        }
    }
    return norm;
}

} // namespace est
