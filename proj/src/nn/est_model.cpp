#include "est/est_model.hpp"

#include "est/init.hpp"
#include "est/ops.hpp"

#include <fmt/format.h>

namespace est {

void ESTConfig::validate() const {
    auto positive = [](std::size_t v, const char* field) {
        if (v == 0) {
            throw ConfigError(fmt::format("est config: {} must be positive", field));
        }
    };
    positive(memory_units, "memory_units");
    positive(memory_dim, "memory_dim");
    positive(attention_dim, "attention_dim");
    positive(num_layers, "num_layers");
    positive(input_dim, "input_dim");
    positive(output_dim, "output_dim");
    if (!(connectivity > 0.0 && connectivity <= 1.0)) {
        throw ConfigError(fmt::format("est config: connectivity must lie in (0, 1], got {}", connectivity));
    }
}

void to_json(nlohmann::json& j, const ESTConfig& c) {
    j = {{"family", "est"},
         {"memory_units", c.memory_units},
         {"memory_dim", c.memory_dim},
         {"attention_dim", c.attention_dim},
         {"num_layers", c.num_layers},
         {"input_dim", c.input_dim},
         {"output_dim", c.output_dim},
         {"connectivity", c.connectivity},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ESTConfig& c) {
    c.memory_units = j.at("memory_units").get<std::size_t>();
    c.memory_dim = j.at("memory_dim").get<std::size_t>();
    c.attention_dim = j.at("attention_dim").get<std::size_t>();
    c.num_layers = j.value("num_layers", std::size_t{1});
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.output_dim = j.at("output_dim").get<std::size_t>();
    c.connectivity = j.value("connectivity", default_connectivity);
    c.seed = j.value("seed", std::uint64_t{0});
}

ESTModel::ESTModel(ESTConfig config) : config_(config) {
    config_.validate();
    const std::size_t m = config_.memory_units, d_m = config_.memory_dim, d_a = config_.attention_dim;
    Rng rng = make_rng(config_.seed, "est.init");

    embed_w = fan_in_parameter(config_.input_dim, d_a, rng);
    embed_b = zero_parameter(1, d_a);
    layers.reserve(config_.num_layers);
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
        ESTLayer layer;
        for (std::size_t i = 0; i < m; ++i) {
            layer.state_heads.push_back(AttentionHead::init(d_a, d_m, d_a, d_a, rng));
            const auto unit_seed = derive_seed(config_.seed, fmt::format("est.layer{}.unit{}", l, i));
            layer.units.push_back(init_reservoir(d_m, d_a, config_.connectivity, unit_seed));
        }
        layer.self_head = AttentionHead::init(d_m, d_m, d_a, d_m, rng);
        layer.reduce = fan_in_parameter(m * d_m, d_a, rng);
        layer.ff = FeedForward::init(d_a, rng);
        layers.push_back(std::move(layer));
    }
    out_w = fan_in_parameter(d_a, config_.output_dim, rng);
    out_b = zero_parameter(1, config_.output_dim);
}

void ESTModel::reset_state() {
    memory_.assign(layers.size(), WorkingMemoryState{});
    for (auto& mem : memory_) {
        mem = WorkingMemoryState::zeros(config_.memory_units, config_.memory_dim);
    }
}

void ESTModel::detach_memory() {
    for (auto& mem : memory_) {
        mem.states = mem.states.clone();
    }
}

Tensor ESTModel::forward_step(const Tensor& token) {
    if (!has_state()) {
        throw UsageError("ESTModel::forward_step called before reset_state()");
    }
    if (token.rows() != 1 || token.cols() != config_.input_dim) {
        throw DimensionError(fmt::format("ESTModel::forward_step: token {} expected [1x{}]",
                                         to_string(token.shape()), config_.input_dim));
    }
    Tensor x = add_bias(matmul(token, embed_w), embed_b);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        Tensor unit_inputs = previous_state_attention(x, memory_[l].states, layer.state_heads);
        memory_[l] = memory_step(memory_[l], unit_inputs, layer.units);
        Tensor h = memory_self_attention(memory_[l].states, layer.self_head, layer.reduce);
        x = feed_forward(h, layer.ff);
    }
    return add_bias(matmul(x, out_w), out_b);
}

std::vector<NamedTensor> ESTModel::named_parameters() const {
    std::vector<NamedTensor> out{{"embed.w", embed_w}, {"embed.b", embed_b}};
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        const auto prefix = fmt::format("layers.{}.", l);
        for (std::size_t i = 0; i < layer.state_heads.size(); ++i) {
            const auto& h = layer.state_heads[i];
            const auto p = fmt::format("{}state_attention.{}.", prefix, i);
            out.push_back({p + "w_q", h.w_q});
            out.push_back({p + "w_k", h.w_k});
            out.push_back({p + "w_v", h.w_v});
        }
        for (std::size_t i = 0; i < layer.units.size(); ++i) {
            const auto& u = layer.units[i];
            const auto p = fmt::format("{}memory.{}.", prefix, i);
            out.push_back({p + "rho", u.rho});
            out.push_back({p + "w_in", u.w_in});
            out.push_back({p + "score_w", u.score_w});
            out.push_back({p + "score_b", u.score_b});
        }
        out.push_back({prefix + "self_attention.w_q", layer.self_head.w_q});
        out.push_back({prefix + "self_attention.w_k", layer.self_head.w_k});
        out.push_back({prefix + "self_attention.w_v", layer.self_head.w_v});
        out.push_back({prefix + "reduce", layer.reduce});
        out.push_back({prefix + "ff.w1", layer.ff.w1});
        out.push_back({prefix + "ff.b1", layer.ff.b1});
        out.push_back({prefix + "ff.w2", layer.ff.w2});
        out.push_back({prefix + "ff.b2", layer.ff.b2});
    }
    out.push_back({"out.w", out_w});
    out.push_back({"out.b", out_b});
    return out;
}

std::vector<NamedTensor> ESTModel::named_buffers() const {
    std::vector<NamedTensor> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t i = 0; i < layers[l].units.size(); ++i) {
            out.push_back({fmt::format("layers.{}.memory.{}.w_hat", l, i), layers[l].units[i].w_hat});
        }
    }
    return out;
}

nlohmann::json ESTModel::config_json() const { return config_; }

std::vector<ParameterBlock> parameter_blocks(const ESTConfig& c) {
    const std::size_t m = c.memory_units, d_m = c.memory_dim, d_a = c.attention_dim, l = c.num_layers;
    return {
        {"embed", c.input_dim * d_a + d_a},
        {"state_attention", l * m * (d_a * d_a + d_m * d_a + d_m * d_a)},
        {"memory", l * m * (1 + d_a * d_m + d_a + 1)},
        {"self_attention", l * (2 * d_m * d_a + d_m * d_m + m * d_m * d_a)},
        {"ff", l * (2 * FeedForward::expansion * d_a * d_a + FeedForward::expansion * d_a + d_a)},
        {"out", d_a * c.output_dim + c.output_dim},
    };
}

std::size_t count_parameters(const ESTConfig& c) {
    std::size_t total = 0;
    for (const auto& b : parameter_blocks(c)) {
        total += b.count;
    }
    return total;
}

} // namespace est
