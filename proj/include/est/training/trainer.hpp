#pragma once

// Mini-batch BPTT training with AdamW, global-norm clipping and early stopping
// on the masked validation error. Each sequence is unrolled on its own tape and
// its gradient accumulated, so a batch costs the same as its sequences one by
// one; the loss is normalised by the evaluated positions of the whole batch.

#include "est/sequence_model.hpp"
#include "est/stream/tasks.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <string>

namespace est {

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    std::size_t batch_size = 10;
    std::size_t epochs = 250;
    std::size_t patience = 30;
    std::uint64_t seed = 0;
    double clip_norm = 1.0;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Starts from defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct RunRecord {
    std::string task;
    std::string family;
    std::string size;      // size bucket label, may be empty for ad-hoc models
    std::string config_id; // zoo name or "custom"
    double learning_rate = 0.0;
    std::uint64_t seed = 0;
    double val_error = 0.0;
    double test_error = 0.0;
    std::size_t epochs = 0; // epochs actually run
    std::int64_t wall_ms = 0;
    std::string status = "ok"; // "ok" or "failed"
    std::string message;       // failure diagnostic

    [[nodiscard]] bool ok() const { return status == "ok"; }
    /// Identity of the sweep cell: task, config, learning rate, seed.
    [[nodiscard]] std::string key() const;
};

/// Predictions for every sample, computed without recording.
std::vector<Tensor> predict(SequenceModel& model, std::span<const stream::TaskSample> samples);
/// Masked task error of the model on `samples`.
double evaluate(SequenceModel& model, std::span<const stream::TaskSample> samples);

/// Loss of one sequence, normalised by `denominator` evaluated positions.
Tensor sequence_loss(SequenceModel& model, const stream::TaskSample& sample, double denominator);

struct EpochReport {
    std::size_t epoch = 0; // 1-based
    double train_loss = 0.0;
    double val_error = 0.0;
    bool improved = false;
};

using EpochCallback = std::function<void(const EpochReport&)>;

/// Trains in place and leaves the best-validation parameters in the model. The
/// record carries the validation error of that epoch and the test error
/// computed once from it. A non-finite loss or gradient stops the run with
/// status "failed".
RunRecord train(SequenceModel& model, const stream::Dataset& data, const TrainConfig& cfg,
                const EpochCallback& on_epoch = {});

/// Copies of every parameter value, in named_parameters() order.
std::vector<std::vector<double>> snapshot_parameters(const SequenceModel& model);
void restore_parameters(SequenceModel& model, const std::vector<std::vector<double>>& values);

} // namespace est
