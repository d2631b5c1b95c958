#pragma once

// Attention-bearing blocks of the echo state transformer layer: generic scaled
// dot-product attention, per-unit previous-state attention, self-attention over
// the memory units with its dimension-reducing map, and the feed-forward block.

#include "est/ops.hpp"
#include "est/rng.hpp"
#include "est/tensor.hpp"

#include <span>
#include <vector>

namespace est {

/// Query/key/value projections. Rows of the inputs are tokens.
struct AttentionHead {
    Tensor w_q; // [d_in_q x d_k]
    Tensor w_k; // [d_in_kv x d_k]
    Tensor w_v; // [d_in_kv x d_v]

    static AttentionHead init(std::size_t d_in_q, std::size_t d_in_kv, std::size_t d_k, std::size_t d_v, Rng& rng);

    [[nodiscard]] std::size_t key_dim() const { return w_q.cols(); }
    [[nodiscard]] std::size_t value_dim() const { return w_v.cols(); }
    [[nodiscard]] std::vector<Tensor> parameters() const { return {w_q, w_k, w_v}; }
};

/// Position-wise MLP with a 4x hidden expansion: x + relu(x w1 + b1) w2 + b2.
struct FeedForward {
    Tensor w1; // [d x 4d]
    Tensor b1; // [1 x 4d]
    Tensor w2; // [4d x d]
    Tensor b2; // [1 x d]

    static constexpr std::size_t expansion = 4;
    static FeedForward init(std::size_t d, Rng& rng);

    [[nodiscard]] std::size_t width() const { return w1.rows(); }
    [[nodiscard]] std::vector<Tensor> parameters() const { return {w1, b1, w2, b2}; }
};

/// softmax(q k^T / sqrt(d_k)) v for q [r x d_k], k [m x d_k], v [m x d_v].
/// Masked-out entries get zero weight; a fully masked row throws DimensionError.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask& mask);

/// One attention product per memory unit. Unit i queries the embedding through
/// heads[i] and reads keys/values from all unit states; the embedding is added
/// back as a residual. emb [1 x d_a], states [M x d_m] -> [M x d_a].
Tensor previous_state_attention(const Tensor& emb, const Tensor& states, std::span<const AttentionHead> heads);

/// Self-attention over the M state rows plus the state residual, flattened to
/// [1 x M*d_m] and mapped through `reduce` [(M*d_m) x d_a].
Tensor memory_self_attention(const Tensor& states, const AttentionHead& head, const Tensor& reduce);

Tensor feed_forward(const Tensor& x, const FeedForward& ff);

} // namespace est
