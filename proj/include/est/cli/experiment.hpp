#pragma once

// Declarative experiment files (JSON). One file can describe a single run or a
// sweep grid:
//
//   {
//     "tasks": [{"task": "discrete_postcasting", "n_train": 50}, "sinus_forecasting"],
//     "models": ["est-1-1k"], "families": ["gru"], "sizes": ["1k"],
//     "learning_rates": [0.003, 0.001], "seeds": [0, 1],
//     "train": {"epochs": 100, "patience": 20}
//   }
//
// Singular spellings ("task", "model", "learning_rate", "seed") take one value.
// A task is either a name (benchmark defaults) or a task config object.
// "families" x "sizes" adds every zoo entry of those families and sizes.

#include "est/training/sweep.hpp"

#include <filesystem>

namespace est::cli {

struct ExperimentSpec {
    std::vector<stream::TaskConfig> tasks;
    std::vector<std::string> models;
    std::vector<double> learning_rates;
    std::vector<std::uint64_t> seeds;
    TrainOverrides train;

    /// Throws ConfigError with the offending field path.
    static ExperimentSpec from_json(const nlohmann::json& j);
    [[nodiscard]] nlohmann::json to_json() const;

    /// The only task, model, learning rate or seed; ConfigError when the list
    /// does not hold exactly one value.
    [[nodiscard]] const stream::TaskConfig& single_task() const;
    [[nodiscard]] const std::string& single_model() const;
    [[nodiscard]] double single_learning_rate() const;
    [[nodiscard]] std::uint64_t single_seed() const;

    [[nodiscard]] SweepSpec sweep_spec() const;
};

/// Parses a JSON file; syntax errors and missing files raise ConfigError.
[[nodiscard]] ExperimentSpec load_experiment(const std::filesystem::path& file);

} // namespace est::cli
