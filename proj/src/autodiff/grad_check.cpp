#include "est/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace est {

double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double eps) {
    if (!(eps > 0.0)) {
        throw std::invalid_argument("grad_check: eps must be positive");
    }
    for (auto& p : params) {
        if (!p.requires_grad()) {
            p.set_requires_grad(true);
        }
        p.zero_grad();
    }
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = f();
        backward(loss, tape);
    }

    NoGradScope no_grad;
    double worst = 0.0;
    for (auto& p : params) {
        auto values = p.mutable_data();
        const auto analytic = p.grad();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + eps;
            const double up = f().item();
            values[i] = saved - eps;
            const double down = f().item();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace est
