#pragma once

// Differentiable primitives. Broadcasting is limited to a 1x1 tensor times a
// tensor (mul_scalar) and a 1xN bias added to every row (add_bias).

#include "est/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace est {

/// Row-major r x m boolean mask; true marks an allowed (visible) entry.
struct Mask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> allowed;

    static Mask causal(std::size_t n);
    [[nodiscard]] bool at(std::size_t r, std::size_t c) const { return allowed[r * cols + c] != 0; }
};

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materialising the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise, same-shape operands.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// x + bias, bias is 1 x cols and is added to every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// c * x for a constant c.
Tensor scale(const Tensor& x, double c);
/// x + c for a constant c.
Tensor add_constant(const Tensor& x, double c);
/// s * x where s is a 1x1 tensor (differentiable in both).
Tensor mul_scalar(const Tensor& s, const Tensor& x);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

/// Row-wise softmax, stabilised by subtracting the row maximum. Entries where the
/// mask is false get exactly zero weight; a row with no allowed entry is an error.
Tensor softmax_rows(const Tensor& x);
Tensor softmax_rows(const Tensor& x, const Mask& mask);

// Structural.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
/// Same data, new shape (row-major order is preserved).
Tensor reshape(const Tensor& x, std::size_t rows, std::size_t cols);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Per-row normalisation to zero mean / unit variance, then gamma * xhat + beta
/// (gamma, beta are 1 x cols).
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Losses over the rows selected by `row_mask`, divided by `denominator`
// (the number of selected rows in the whole batch).

/// Cross-entropy of softmax(logits) against one-hot (or probability) target rows.
Tensor masked_cross_entropy(const Tensor& logits, const Tensor& targets,
                            std::span<const std::uint8_t> row_mask, double denominator);
/// Squared error averaged over columns, summed over selected rows.
Tensor masked_mse(const Tensor& prediction, const Tensor& targets,
                  std::span<const std::uint8_t> row_mask, double denominator);

} // namespace est
