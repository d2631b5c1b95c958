#pragma once

// Grid sweeps over tasks x named models x learning rates x seeds. Each cell is
// an independent training run; a bounded pool of worker threads claims cells in
// grid order and appends each finished record to the results store. Cells whose
// key is already in the store are skipped, which makes an interrupted sweep
// resumable.

#include "est/training/model_zoo.hpp"
#include "est/training/results.hpp"
#include "est/training/trainer.hpp"

#include <filesystem>
#include <functional>
#include <optional>

namespace est {

/// Training settings applied on top of the task's own batch size, epoch budget
/// and patience.
struct TrainOverrides {
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> patience;
    std::optional<double> weight_decay;
    std::optional<double> clip_norm;
};

void to_json(nlohmann::json& j, const TrainOverrides& o);
/// Unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainOverrides& o);

[[nodiscard]] TrainConfig make_train_config(const stream::TaskConfig& task, double learning_rate,
                                            std::uint64_t seed, const TrainOverrides& overrides = {});

/// Instantiates `m` for the task (dimensions, Transformer capacity) with the run
/// seed and trains it. `trained`, when given, receives the model afterwards.
RunRecord run_named(const NamedModel& m, const stream::TaskConfig& task, const stream::Dataset& data,
                    const TrainConfig& cfg, const EpochCallback& on_epoch = {},
                    std::unique_ptr<SequenceModel>* trained = nullptr);

/// Zoo entries whose family and size are both listed, in zoo order.
[[nodiscard]] std::vector<std::string> select_models(std::span<const std::string> families,
                                                     std::span<const std::string> sizes);

struct SweepSpec {
    std::vector<stream::TaskConfig> tasks; // task names must be distinct
    std::vector<std::string> models;       // zoo names
    std::vector<double> learning_rates;
    std::vector<std::uint64_t> seeds;
    TrainOverrides train;

    /// Throws ConfigError on empty grids, duplicates or unknown models.
    void validate() const;
};

struct SweepCell {
    std::size_t task_index = 0;
    const NamedModel* model = nullptr;
    double learning_rate = 0.0;
    std::uint64_t seed = 0;
};

/// Grid product in task, model, learning rate, seed order.
[[nodiscard]] std::vector<SweepCell> expand(const SweepSpec& spec);
[[nodiscard]] std::string cell_key(std::string_view task, std::string_view config_id, double learning_rate,
                                   std::uint64_t seed);

struct SweepOptions {
    std::size_t workers = 1;
    bool resume = false;
    /// Stop claiming cells after this many new runs; 0 means no limit.
    std::size_t max_new_runs = 0;
    /// Called under the store lock after each record is written.
    std::function<void(const RunRecord&, std::size_t done, std::size_t total)> on_record;
};

struct SweepResult {
    std::size_t total = 0;
    std::size_t skipped = 0;
    std::size_t executed = 0;
    std::size_t failed = 0;
};

/// Failed runs, including exceptions thrown while training, are recorded with
/// status "failed" and the sweep moves on. Data generation errors propagate.
SweepResult sweep(const SweepSpec& spec, const std::filesystem::path& store, const SweepOptions& options = {});

} // namespace est
