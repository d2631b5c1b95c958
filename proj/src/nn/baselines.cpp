#include "est/baselines.hpp"

#include "est/attention.hpp"
#include "est/init.hpp"
#include "est/rng.hpp"

#include <cmath>

#include <fmt/format.h>

namespace est {

namespace {

RecurrentLayer init_recurrent_layer(std::size_t in, std::size_t h, std::size_t gates, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    return {uniform_parameter(in, gates * h, bound, rng), uniform_parameter(1, gates * h, bound, rng),
            uniform_parameter(h, gates * h, bound, rng), uniform_parameter(1, gates * h, bound, rng)};
}

void append_layer(std::vector<NamedTensor>& out, std::size_t l, const RecurrentLayer& layer) {
    const auto p = fmt::format("layers.{}.", l);
    out.push_back({p + "w_input", layer.w_input});
    out.push_back({p + "b_input", layer.b_input});
    out.push_back({p + "w_hidden", layer.w_hidden});
    out.push_back({p + "b_hidden", layer.b_hidden});
}

void check_token(const Tensor& token, std::size_t input_dim, const char* who) {
    if (token.rows() != 1 || token.cols() != input_dim) {
        throw DimensionError(fmt::format("{}: token {} expected [1x{}]", who, to_string(token.shape()), input_dim));
    }
}

} // namespace

void RNNConfig::validate() const {
    if (hidden_size == 0 || num_layers == 0 || input_dim == 0 || output_dim == 0) {
        throw ConfigError("recurrent config: hidden_size, num_layers, input_dim and output_dim must be positive");
    }
}

void to_json(nlohmann::json& j, const RNNConfig& c) {
    j = {{"hidden_size", c.hidden_size}, {"num_layers", c.num_layers}, {"input_dim", c.input_dim},
         {"output_dim", c.output_dim},   {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, RNNConfig& c) {
    c.hidden_size = j.at("hidden_size").get<std::size_t>();
    c.num_layers = j.value("num_layers", std::size_t{1});
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.output_dim = j.at("output_dim").get<std::size_t>();
    c.seed = j.value("seed", std::uint64_t{0});
}

// ---------------------------------------------------------------------------- GRU

GRUModel::GRUModel(const RNNConfig& config) : config_(config) {
    config_.validate();
    Rng rng = make_rng(config_.seed, "gru.init");
    const std::size_t h = config_.hidden_size;
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
        layers.push_back(init_recurrent_layer(l == 0 ? config_.input_dim : h, h, 3, rng));
    }
    out_w = fan_in_parameter(h, config_.output_dim, rng);
    out_b = zero_parameter(1, config_.output_dim);
}

void GRUModel::reset_state() { hidden_.assign(layers.size(), Tensor::zeros(1, config_.hidden_size)); }

Tensor GRUModel::forward_step(const Tensor& token) {
    if (!has_state()) {
        throw UsageError("GRUModel::forward_step called before reset_state()");
    }
    check_token(token, config_.input_dim, "GRUModel::forward_step");
    const std::size_t h = config_.hidden_size;
    Tensor x = token;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        const Tensor& prev = hidden_[l];
        Tensor gi = add_bias(matmul(x, layer.w_input), layer.b_input);
        Tensor gh = add_bias(matmul(prev, layer.w_hidden), layer.b_hidden);
        Tensor r = sigmoid(add(slice_cols(gi, 0, h), slice_cols(gh, 0, h)));
        Tensor z = sigmoid(add(slice_cols(gi, h, h), slice_cols(gh, h, h)));
        Tensor n = tanh(add(slice_cols(gi, 2 * h, h), mul(r, slice_cols(gh, 2 * h, h))));
        // (1 - z) n + z h = n + z (h - n)
        Tensor next = add(n, mul(z, sub(prev, n)));
        hidden_[l] = next;
        x = next;
    }
    return add_bias(matmul(x, out_w), out_b);
}

std::vector<NamedTensor> GRUModel::named_parameters() const {
    std::vector<NamedTensor> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        append_layer(out, l, layers[l]);
    }
    out.push_back({"out.w", out_w});
    out.push_back({"out.b", out_b});
    return out;
}

nlohmann::json GRUModel::config_json() const {
    nlohmann::json j = config_;
    j["family"] = "gru";
    return j;
}

// ---------------------------------------------------------------------------- LSTM

LSTMModel::LSTMModel(const RNNConfig& config) : config_(config) {
    config_.validate();
    Rng rng = make_rng(config_.seed, "lstm.init");
    const std::size_t h = config_.hidden_size;
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
        layers.push_back(init_recurrent_layer(l == 0 ? config_.input_dim : h, h, 4, rng));
    }
    out_w = fan_in_parameter(h, config_.output_dim, rng);
    out_b = zero_parameter(1, config_.output_dim);
}

void LSTMModel::reset_state() {
    hidden_.assign(layers.size(), Tensor::zeros(1, config_.hidden_size));
    cell_.assign(layers.size(), Tensor::zeros(1, config_.hidden_size));
}

Tensor LSTMModel::forward_step(const Tensor& token) {
    if (!has_state()) {
        throw UsageError("LSTMModel::forward_step called before reset_state()");
    }
    check_token(token, config_.input_dim, "LSTMModel::forward_step");
    const std::size_t h = config_.hidden_size;
    Tensor x = token;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        Tensor gates = add(add_bias(matmul(x, layer.w_input), layer.b_input),
                           add_bias(matmul(hidden_[l], layer.w_hidden), layer.b_hidden));
        Tensor i = sigmoid(slice_cols(gates, 0, h));
        Tensor f = sigmoid(slice_cols(gates, h, h));
        Tensor g = tanh(slice_cols(gates, 2 * h, h));
        Tensor o = sigmoid(slice_cols(gates, 3 * h, h));
        cell_[l] = add(mul(f, cell_[l]), mul(i, g));
        hidden_[l] = mul(o, tanh(cell_[l]));
        x = hidden_[l];
    }
    return add_bias(matmul(x, out_w), out_b);
}

std::vector<NamedTensor> LSTMModel::named_parameters() const {
    std::vector<NamedTensor> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        append_layer(out, l, layers[l]);
    }
    out.push_back({"out.w", out_w});
    out.push_back({"out.b", out_b});
    return out;
}

nlohmann::json LSTMModel::config_json() const {
    nlohmann::json j = config_;
    j["family"] = "lstm";
    return j;
}

// ---------------------------------------------------------------------------- Transformer

void TransformerConfig::validate() const {
    if (d_model == 0 || nhead == 0 || num_layers == 0 || dim_feedforward == 0 || input_dim == 0 ||
        output_dim == 0 || max_len == 0) {
        throw ConfigError("transformer config: all sizes must be positive");
    }
    if (d_model % nhead != 0) {
        throw ConfigError(fmt::format("transformer config: d_model={} is not divisible by nhead={}", d_model, nhead));
    }
}

void to_json(nlohmann::json& j, const TransformerConfig& c) {
    j = {{"family", "transformer"},
         {"d_model", c.d_model},
         {"nhead", c.nhead},
         {"num_layers", c.num_layers},
         {"dim_feedforward", c.dim_feedforward},
         {"input_dim", c.input_dim},
         {"output_dim", c.output_dim},
         {"max_len", c.max_len},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TransformerConfig& c) {
    c.d_model = j.at("d_model").get<std::size_t>();
    c.nhead = j.at("nhead").get<std::size_t>();
    c.num_layers = j.value("num_layers", std::size_t{1});
    c.dim_feedforward = j.at("dim_feedforward").get<std::size_t>();
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.output_dim = j.at("output_dim").get<std::size_t>();
    c.max_len = j.value("max_len", std::size_t{256});
    c.seed = j.value("seed", std::uint64_t{0});
}

TransformerModel::TransformerModel(TransformerConfig config) : config_(config) {
    config_.validate();
    Rng rng = make_rng(config_.seed, "transformer.init");
    const std::size_t d = config_.d_model, ff = config_.dim_feedforward;
    embed_w = fan_in_parameter(config_.input_dim, d, rng);
    embed_b = zero_parameter(1, d);
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
        TransformerLayer layer;
        layer.w_qkv = fan_in_parameter(d, 3 * d, rng);
        layer.b_qkv = zero_parameter(1, 3 * d);
        layer.w_o = fan_in_parameter(d, d, rng);
        layer.b_o = zero_parameter(1, d);
        layer.norm1_gamma = Tensor::full(1, d, 1.0, true);
        layer.norm1_beta = zero_parameter(1, d);
        layer.w_ff1 = fan_in_parameter(d, ff, rng);
        layer.b_ff1 = zero_parameter(1, ff);
        layer.w_ff2 = fan_in_parameter(ff, d, rng);
        layer.b_ff2 = zero_parameter(1, d);
        layer.norm2_gamma = Tensor::full(1, d, 1.0, true);
        layer.norm2_beta = zero_parameter(1, d);
        layers.push_back(std::move(layer));
    }
    out_w = fan_in_parameter(d, config_.output_dim, rng);
    out_b = zero_parameter(1, config_.output_dim);

    std::vector<double> pe(config_.max_len * d);
    for (std::size_t pos = 0; pos < config_.max_len; ++pos) {
        for (std::size_t i = 0; i < d; ++i) {
            const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d);
            const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
            pe[pos * d + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    positions_ = Tensor::from(config_.max_len, d, std::move(pe));
}

Tensor TransformerModel::forward_sequence(const Tensor& tokens) {
    const std::size_t t = tokens.rows();
    if (t == 0) {
        throw UsageError("TransformerModel::forward_sequence: empty sequence");
    }
    if (t > config_.max_len) {
        throw CapacityError(fmt::format("sequence of length {} exceeds transformer max_len {}", t, config_.max_len));
    }
    if (tokens.cols() != config_.input_dim) {
        throw DimensionError(fmt::format("TransformerModel: tokens {} expected {} channels",
                                         to_string(tokens.shape()), config_.input_dim));
    }
    const std::size_t d = config_.d_model, heads = config_.nhead, dh = d / heads;
    const Mask causal = Mask::causal(t);
    Tensor x = add(add_bias(matmul(tokens, embed_w), embed_b), slice_rows(positions_, 0, t));
    for (const auto& layer : layers) {
        Tensor qkv = add_bias(matmul(x, layer.w_qkv), layer.b_qkv);
        std::vector<Tensor> per_head;
        per_head.reserve(heads);
        for (std::size_t h = 0; h < heads; ++h) {
            per_head.push_back(scaled_dot_attention(slice_cols(qkv, h * dh, dh), slice_cols(qkv, d + h * dh, dh),
                                                    slice_cols(qkv, 2 * d + h * dh, dh), causal));
        }
        Tensor attended = add_bias(matmul(concat_cols(per_head), layer.w_o), layer.b_o);
        x = layer_norm_rows(add(x, attended), layer.norm1_gamma, layer.norm1_beta);
        Tensor hidden = relu(add_bias(matmul(x, layer.w_ff1), layer.b_ff1));
        Tensor ff = add_bias(matmul(hidden, layer.w_ff2), layer.b_ff2);
        x = layer_norm_rows(add(x, ff), layer.norm2_gamma, layer.norm2_beta);
    }
    return add_bias(matmul(x, out_w), out_b);
}

std::vector<NamedTensor> TransformerModel::named_parameters() const {
    std::vector<NamedTensor> out{{"embed.w", embed_w}, {"embed.b", embed_b}};
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& y = layers[l];
        const auto p = fmt::format("layers.{}.", l);
        out.push_back({p + "w_qkv", y.w_qkv});
        out.push_back({p + "b_qkv", y.b_qkv});
        out.push_back({p + "w_o", y.w_o});
        out.push_back({p + "b_o", y.b_o});
        out.push_back({p + "norm1.gamma", y.norm1_gamma});
        out.push_back({p + "norm1.beta", y.norm1_beta});
        out.push_back({p + "w_ff1", y.w_ff1});
        out.push_back({p + "b_ff1", y.b_ff1});
        out.push_back({p + "w_ff2", y.w_ff2});
        out.push_back({p + "b_ff2", y.b_ff2});
        out.push_back({p + "norm2.gamma", y.norm2_gamma});
        out.push_back({p + "norm2.beta", y.norm2_beta});
    }
    out.push_back({"out.w", out_w});
    out.push_back({"out.b", out_b});
    return out;
}

nlohmann::json TransformerModel::config_json() const { return config_; }

std::size_t count_gru_parameters(const RNNConfig& c) {
    const std::size_t h = c.hidden_size;
    std::size_t n = 0;
    for (std::size_t l = 0; l < c.num_layers; ++l) {
        const std::size_t in = l == 0 ? c.input_dim : h;
        n += 3 * h * (in + h + 2);
    }
    return n + h * c.output_dim + c.output_dim;
}

std::size_t count_lstm_parameters(const RNNConfig& c) {
    const std::size_t h = c.hidden_size;
    std::size_t n = 0;
    for (std::size_t l = 0; l < c.num_layers; ++l) {
        const std::size_t in = l == 0 ? c.input_dim : h;
        n += 4 * h * (in + h + 2);
    }
    return n + h * c.output_dim + c.output_dim;
}

std::size_t count_parameters(const TransformerConfig& c) {
    const std::size_t d = c.d_model, ff = c.dim_feedforward;
    const std::size_t per_layer = (4 * d * d + 4 * d) + (2 * d * ff + ff + d) + 4 * d;
    return c.input_dim * d + d + c.num_layers * per_layer + d * c.output_dim + c.output_dim;
}

} // namespace est
