#pragma once

// Working memory: M reservoir units with fixed random recurrent matrices, a
// trainable spectral radius each, and leak rates that compete through a softmax.
//
// Unit update for input row x and previous state s:
//     s' = (1 - alpha) s + alpha tanh(x w_in + s (rho w_hat)^T)

#include "est/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace est {

struct ReservoirUnit {
    Tensor w_hat;   // [d_m x d_m], fixed, unit spectral radius; never trained
    Tensor rho;     // [1 x 1] effective spectral radius
    Tensor w_in;    // [d_a x d_m]
    Tensor score_w; // [d_a x 1]
    Tensor score_b; // [1 x 1]

    [[nodiscard]] std::size_t memory_dim() const { return w_hat.rows(); }
    [[nodiscard]] std::size_t input_dim() const { return w_in.rows(); }
    /// Trainable tensors only (w_hat excluded).
    [[nodiscard]] std::vector<Tensor> parameters() const { return {rho, w_in, score_w, score_b}; }
};

inline constexpr double default_connectivity = 0.2;
inline constexpr double initial_spectral_radius = 0.9;

/// Samples a unit deterministically from `seed`. Entries of w_hat are standard
/// normal, each kept with probability `connectivity`, then rescaled to spectral
/// radius 1. An all-zero draw is resampled with the next sub-seed.
ReservoirUnit init_reservoir(std::size_t d_m, std::size_t d_a, double connectivity, std::uint64_t seed);

/// Largest eigenvalue modulus of a square matrix (dense eigen-decomposition).
double spectral_radius(const Tensor& square);

struct WorkingMemoryState {
    Tensor states; // [M x d_m], row i is unit i's state

    static WorkingMemoryState zeros(std::size_t units, std::size_t memory_dim);
    [[nodiscard]] std::size_t units() const { return states.rows(); }
};

struct LeakRates {
    Tensor alpha; // [1 x M], softmax output

    [[nodiscard]] std::size_t size() const { return alpha.cols(); }
    [[nodiscard]] double operator[](std::size_t i) const { return alpha.at(0, i); }
};

/// One leaky reservoir update. s_prev [1 x d_m], x [1 x d_a], alpha [1 x 1].
Tensor unit_step(const ReservoirUnit& unit, const Tensor& s_prev, const Tensor& x, const Tensor& alpha);
Tensor unit_step(const ReservoirUnit& unit, const Tensor& s_prev, const Tensor& x, double alpha);

/// score_i = inputs_i . score_w_i + score_b_i, alpha = softmax(score).
LeakRates adaptive_leak_rates(const Tensor& inputs, std::span<const ReservoirUnit> units);

/// Advances every unit with its own leak rate. `inputs` row i is unit i's
/// information vector. The previous state is left untouched.
WorkingMemoryState memory_step(const WorkingMemoryState& mem, const Tensor& inputs,
                               std::span<const ReservoirUnit> units);

} // namespace est
