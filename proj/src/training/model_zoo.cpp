#include "est/training/model_zoo.hpp"

#include <fmt/format.h>

namespace est {

namespace {

NamedModel est_entry(int variant, std::string size, std::size_t m, std::size_t dm, std::size_t da) {
    ESTConfig c;
    c.memory_units = m;
    c.memory_dim = dm;
    c.attention_dim = da;
    c.num_layers = 1;
    return {fmt::format("est-{}-{}", variant, size), "est", size, c};
}

NamedModel rnn_entry(std::string family, std::string size, std::size_t hidden) {
    RNNConfig c;
    c.hidden_size = hidden;
    c.num_layers = 1;
    ModelConfig config = family == "gru" ? ModelConfig{GRUConfig{c}} : ModelConfig{LSTMConfig{c}};
    return {fmt::format("{}-{}", family, size), family, size, config};
}

NamedModel tf_entry(int variant, std::string size, std::size_t d, std::size_t heads, std::size_t ff) {
    TransformerConfig c;
    c.d_model = d;
    c.nhead = heads;
    c.num_layers = 1;
    c.dim_feedforward = ff;
    return {fmt::format("transformer-{}-{}", variant, size), "transformer", size, c};
}

std::vector<NamedModel> build_zoo() {
    return {
        est_entry(1, "1k", 2, 13, 6),
        est_entry(2, "1k", 10, 15, 3),
        est_entry(3, "1k", 5, 5, 5),
        est_entry(4, "1k", 4, 29, 4),
        est_entry(1, "10k", 6, 48, 13),
        est_entry(2, "10k", 14, 49, 8),
        est_entry(3, "10k", 10, 46, 10),
        est_entry(4, "10k", 8, 110, 8),
        est_entry(1, "100k", 12, 101, 32),
        est_entry(2, "100k", 34, 100, 17),
        est_entry(3, "100k", 23, 85, 23),
        est_entry(4, "100k", 16, 314, 16),
        est_entry(1, "1M", 30, 241, 64),
        est_entry(2, "1M", 64, 252, 38),
        est_entry(3, "1M", 47, 253, 47),
        est_entry(4, "1M", 38, 529, 38),
        rnn_entry("gru", "1k", 12),
        rnn_entry("gru", "10k", 51),
        rnn_entry("gru", "100k", 175),
        rnn_entry("gru", "1M", 570),
        rnn_entry("lstm", "1k", 10),
        rnn_entry("lstm", "10k", 43),
        rnn_entry("lstm", "100k", 151),
        rnn_entry("lstm", "1M", 493),
        tf_entry(1, "1k", 8, 2, 29),
        tf_entry(2, "1k", 8, 4, 29),
        tf_entry(3, "1k", 10, 2, 10),
        tf_entry(4, "1k", 10, 5, 10),
        tf_entry(1, "10k", 28, 4, 112),
        tf_entry(2, "10k", 28, 7, 112),
        tf_entry(3, "10k", 38, 2, 38),
        tf_entry(4, "10k", 38, 19, 38),
        tf_entry(1, "100k", 90, 5, 360),
        tf_entry(2, "100k", 90, 18, 360),
        tf_entry(3, "100k", 128, 8, 128),
        tf_entry(4, "100k", 128, 16, 128),
        tf_entry(1, "1M", 290, 29, 1130),
        tf_entry(2, "1M", 290, 58, 1130),
        tf_entry(3, "1M", 405, 9, 405),
        tf_entry(4, "1M", 405, 45, 405),
    };
}

} // namespace

const std::vector<NamedModel>& model_zoo() {
    static const std::vector<NamedModel> zoo = build_zoo();
    return zoo;
}

const NamedModel& find_model(std::string_view name) {
    for (const auto& m : model_zoo()) {
        if (m.name == name) {
            return m;
        }
    }
    throw ConfigError(fmt::format("unknown model configuration '{}'", name));
}

std::size_t nominal_parameters(std::string_view size) {
    if (size == "1k") return 1'000;
    if (size == "10k") return 10'000;
    if (size == "100k") return 100'000;
    if (size == "1M") return 1'000'000;
    throw ConfigError(fmt::format("unknown size bucket '{}'", size));
}

ModelConfig instantiate(const NamedModel& m, std::size_t input_dim, std::size_t output_dim, std::uint64_t seed,
                        std::size_t max_len) {
    return std::visit(
        [&](auto c) -> ModelConfig {
            c.input_dim = input_dim;
            c.output_dim = output_dim;
            c.seed = seed;
            if constexpr (std::is_same_v<decltype(c), TransformerConfig>) {
                c.max_len = max_len;
            }
            return c;
        },
        m.config);
}

std::unique_ptr<SequenceModel> make_model(const ModelConfig& config) {
    return std::visit(
        [](const auto& c) -> std::unique_ptr<SequenceModel> {
            using C = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<C, ESTConfig>) {
                return std::make_unique<ESTModel>(c);
            } else if constexpr (std::is_same_v<C, GRUConfig>) {
                return std::make_unique<GRUModel>(c);
            } else if constexpr (std::is_same_v<C, LSTMConfig>) {
                return std::make_unique<LSTMModel>(c);
            } else {
                return std::make_unique<TransformerModel>(c);
            }
        },
        config);
}

std::unique_ptr<SequenceModel> make_model(const nlohmann::json& config) {
    try {
        const auto family = config.at("family").get<std::string>();
        if (family == "est") {
            return std::make_unique<ESTModel>(config.get<ESTConfig>());
        }
        if (family == "gru") {
            return std::make_unique<GRUModel>(config.get<RNNConfig>());
        }
        if (family == "lstm") {
            return std::make_unique<LSTMModel>(config.get<RNNConfig>());
        }
        if (family == "transformer") {
            return std::make_unique<TransformerModel>(config.get<TransformerConfig>());
        }
        throw ConfigError(fmt::format("unknown model family '{}'", family));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("malformed model config: {}", e.what()));
    }
}

std::size_t count_parameters(const ModelConfig& config) {
    return std::visit([](const auto& c) { return count_parameters(c); }, config);
}

} // namespace est
