#include "est/attention.hpp"

#include "est/init.hpp"

#include <cmath>

#include <fmt/format.h>

namespace est {

AttentionHead AttentionHead::init(std::size_t d_in_q, std::size_t d_in_kv, std::size_t d_k, std::size_t d_v,
                                  Rng& rng) {
    if (d_k == 0) {
        throw DimensionError("attention head needs a positive key width");
    }
    return {fan_in_parameter(d_in_q, d_k, rng), fan_in_parameter(d_in_kv, d_k, rng),
            fan_in_parameter(d_in_kv, d_v, rng)};
}

FeedForward FeedForward::init(std::size_t d, Rng& rng) {
    const std::size_t hidden = expansion * d;
    return {fan_in_parameter(d, hidden, rng), zero_parameter(1, hidden), fan_in_parameter(hidden, d, rng),
            zero_parameter(1, d)};
}

namespace {

Tensor attention_impl(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask) {
    if (q.cols() != k.cols()) {
        throw DimensionError(fmt::format("attention: query {} and key {} widths differ", to_string(q.shape()),
                                         to_string(k.shape())));
    }
    if (k.rows() != v.rows()) {
        throw DimensionError(fmt::format("attention: {} keys but {} values", k.rows(), v.rows()));
    }
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor scores = scale(matmul_nt(q, k), inv_sqrt_dk);
    Tensor weights = mask != nullptr ? softmax_rows(scores, *mask) : softmax_rows(scores);
    return matmul(weights, v);
}

} // namespace

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    return attention_impl(q, k, v, nullptr);
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask& mask) {
    return attention_impl(q, k, v, &mask);
}

Tensor previous_state_attention(const Tensor& emb, const Tensor& states, std::span<const AttentionHead> heads) {
    if (heads.empty()) {
        throw ConfigError("previous_state_attention: at least one memory unit is required");
    }
    if (heads.size() != states.rows()) {
        throw DimensionError(
            fmt::format("previous_state_attention: {} heads for {} memory units", heads.size(), states.rows()));
    }
    if (emb.rows() != 1) {
        throw DimensionError(fmt::format("previous_state_attention: embedding must be one row, got {}",
                                         to_string(emb.shape())));
    }
    std::vector<Tensor> rows;
    rows.reserve(heads.size());
    for (const auto& h : heads) {
        Tensor q = matmul(emb, h.w_q);
        Tensor k = matmul(states, h.w_k);
        Tensor v = matmul(states, h.w_v);
        rows.push_back(add(scaled_dot_attention(q, k, v), emb));
    }
    return concat_rows(rows);
}

Tensor memory_self_attention(const Tensor& states, const AttentionHead& head, const Tensor& reduce) {
    const std::size_t m = states.rows(), d_m = states.cols();
    if (head.value_dim() != d_m) {
        throw DimensionError(fmt::format("memory_self_attention: value width {} must equal memory width {}",
                                         head.value_dim(), d_m));
    }
    if (reduce.rows() != m * d_m) {
        throw DimensionError(fmt::format("memory_self_attention: reduce {} expects {} inputs",
                                         to_string(reduce.shape()), m * d_m));
    }
    Tensor q = matmul(states, head.w_q);
    Tensor k = matmul(states, head.w_k);
    Tensor v = matmul(states, head.w_v);
    Tensor attended = add(scaled_dot_attention(q, k, v), states);
    return matmul(reshape(attended, 1, m * d_m), reduce);
}

Tensor feed_forward(const Tensor& x, const FeedForward& ff) {
    Tensor hidden = relu(add_bias(matmul(x, ff.w1), ff.b1));
    return add(x, add_bias(matmul(hidden, ff.w2), ff.b2));
}

} // namespace est
