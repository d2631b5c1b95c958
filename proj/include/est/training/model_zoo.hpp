#pragma once

// Named model configurations at four parameter budgets (1k, 10k, 100k, 1M):
// four EST and four Transformer shapes per budget, one GRU and one LSTM.
// Names follow "<family>-<variant>-<size>" ("est-1-1k") or "<family>-<size>"
// for the recurrent baselines ("gru-1k").

#include "est/baselines.hpp"
#include "est/est_model.hpp"

#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace est {

using ModelConfig = std::variant<ESTConfig, GRUConfig, LSTMConfig, TransformerConfig>;

struct NamedModel {
    std::string name;   // "est-1-1k"
    std::string family; // "est", "gru", "lstm", "transformer"
    std::string size;   // "1k", "10k", "100k", "1M"
    ModelConfig config; // input/output dims and seed left at defaults
};

[[nodiscard]] const std::vector<NamedModel>& model_zoo();
/// Throws ConfigError for names outside the zoo.
[[nodiscard]] const NamedModel& find_model(std::string_view name);

/// Nominal parameter budget of a size label (1000 for "1k", ...).
[[nodiscard]] std::size_t nominal_parameters(std::string_view size);

/// Copy of the named configuration with task dimensions and seed filled in.
/// max_len only applies to Transformers.
[[nodiscard]] ModelConfig instantiate(const NamedModel& m, std::size_t input_dim, std::size_t output_dim,
                                      std::uint64_t seed, std::size_t max_len = 256);

[[nodiscard]] std::unique_ptr<SequenceModel> make_model(const ModelConfig& config);
/// Rebuilds a model from SequenceModel::config_json().
[[nodiscard]] std::unique_ptr<SequenceModel> make_model(const nlohmann::json& config);

[[nodiscard]] std::size_t count_parameters(const ModelConfig& config);

} // namespace est
