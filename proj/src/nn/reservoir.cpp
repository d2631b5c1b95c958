#include "est/reservoir.hpp"

#include "est/init.hpp"
#include "est/ops.hpp"
#include "est/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace est {

double spectral_radius(const Tensor& square) {
    if (square.rows() != square.cols()) {
        throw DimensionError(fmt::format("spectral_radius: {} is not square", to_string(square.shape())));
    }
    const auto n = static_cast<Eigen::Index>(square.rows());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            m(i, j) = square.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw NumericError("spectral_radius: eigenvalue iteration did not converge");
    }
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

ReservoirUnit init_reservoir(std::size_t d_m, std::size_t d_a, double connectivity, std::uint64_t seed) {
    if (!(connectivity > 0.0 && connectivity <= 1.0)) {
        throw ConfigError(fmt::format("reservoir connectivity must lie in (0, 1], got {}", connectivity));
    }
    if (d_m == 0 || d_a == 0) {
        throw ConfigError("reservoir dimensions must be positive");
    }

    std::vector<double> w(d_m * d_m);
    double radius = 0.0;
    for (std::uint64_t sub = 0; radius == 0.0; ++sub) {
        Rng rng = make_rng(seed + sub, "reservoir.w_hat");
        std::bernoulli_distribution keep(connectivity);
        for (auto& x : w) {
            const double v = standard_normal(rng);
            x = keep(rng) ? v : 0.0;
        }
        radius = spectral_radius(Tensor::from(d_m, d_m, w));
    }
    for (auto& x : w) {
        x /= radius;
    }

    Rng rng = make_rng(seed, "reservoir.trainable");
    ReservoirUnit unit;
    unit.w_hat = Tensor::from(d_m, d_m, std::move(w));
    unit.rho = Tensor::scalar(initial_spectral_radius, true);
    unit.w_in = fan_in_parameter(d_a, d_m, rng);
    unit.score_w = fan_in_parameter(d_a, 1, rng);
    unit.score_b = zero_parameter(1, 1);
    return unit;
}

WorkingMemoryState WorkingMemoryState::zeros(std::size_t units, std::size_t memory_dim) {
    return {Tensor::zeros(units, memory_dim)};
}

Tensor unit_step(const ReservoirUnit& unit, const Tensor& s_prev, const Tensor& x, const Tensor& alpha) {
    // s_prev (rho w_hat)^T computed as rho * (s_prev w_hat^T) to avoid scaling the matrix.
    Tensor recurrent = mul_scalar(unit.rho, matmul_nt(s_prev, unit.w_hat));
    Tensor candidate = tanh(add(matmul(x, unit.w_in), recurrent));
    return add(s_prev, mul_scalar(alpha, sub(candidate, s_prev)));
}

Tensor unit_step(const ReservoirUnit& unit, const Tensor& s_prev, const Tensor& x, double alpha) {
    return unit_step(unit, s_prev, x, Tensor::scalar(alpha));
}

LeakRates adaptive_leak_rates(const Tensor& inputs, std::span<const ReservoirUnit> units) {
    if (units.empty() || inputs.rows() != units.size()) {
        throw DimensionError(fmt::format("adaptive_leak_rates: {} input rows for {} units", inputs.rows(),
                                         units.size()));
    }
    std::vector<Tensor> scores;
    scores.reserve(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        const auto& u = units[i];
        scores.push_back(add(matmul(slice_rows(inputs, i, 1), u.score_w), u.score_b));
    }
    return {softmax_rows(concat_cols(scores))};
}

WorkingMemoryState memory_step(const WorkingMemoryState& mem, const Tensor& inputs,
                               std::span<const ReservoirUnit> units) {
    if (mem.units() != units.size()) {
        throw DimensionError(fmt::format("memory_step: state has {} units, {} given", mem.units(), units.size()));
    }
    const LeakRates rates = adaptive_leak_rates(inputs, units);
    std::vector<Tensor> rows;
    rows.reserve(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        rows.push_back(unit_step(units[i], slice_rows(mem.states, i, 1), slice_rows(inputs, i, 1),
                                 slice_cols(rates.alpha, i, 1)));
    }
    return {concat_rows(rows)};
}

} // namespace est
