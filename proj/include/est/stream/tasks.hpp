#pragma once

// Synthetic sequence tasks probing memory, signal processing, long-range
// dependencies, and information manipulation, plus sequential MNIST.
//
// Every sample is a [T x input_dim] input matrix, a [T x output_dim] target
// matrix, and an evaluation mask over the T positions. Discrete targets are
// one-hot at evaluated positions and zero elsewhere.
//
// Input channel layouts (blocks concatenated left to right):
//   discrete_postcasting            symbol[n_symbols]
//   continuous_postcasting          value
//   sinus_forecasting               value
//   chaotic_forecasting             x, y, z
//   discrete_pattern_completion     symbol[n_symbols] | mask | marker
//   continuous_pattern_completion   value (-1 when masked)
//   simple_copy                     symbol[n_symbols] | trigger
//   selective_copy                  symbol[n_symbols] | marker | trigger
//   adding_problem                  number[max_number] | marker | trigger
//   sorting_problem                 symbol[n_symbols] | position[sequence_length] | trigger
//   sequential_mnist                pixel column[28] | trigger
//   bracket_matching                open | close

#include "est/rng.hpp"
#include "est/tensor.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace est::stream {

enum class TaskKind { discrete, continuous };

enum class TaskId {
    discrete_postcasting,
    continuous_postcasting,
    sinus_forecasting,
    chaotic_forecasting,
    discrete_pattern_completion,
    continuous_pattern_completion,
    simple_copy,
    selective_copy,
    adding_problem,
    sorting_problem,
    sequential_mnist,
    bracket_matching,
};

inline constexpr std::array all_tasks{
    TaskId::discrete_postcasting,        TaskId::continuous_postcasting,
    TaskId::sinus_forecasting,           TaskId::chaotic_forecasting,
    TaskId::discrete_pattern_completion, TaskId::continuous_pattern_completion,
    TaskId::simple_copy,                 TaskId::selective_copy,
    TaskId::adding_problem,              TaskId::sorting_problem,
    TaskId::sequential_mnist,            TaskId::bracket_matching,
};

[[nodiscard]] std::string_view task_name(TaskId id);
/// Throws ConfigError for unknown names.
[[nodiscard]] TaskId parse_task(std::string_view name);
[[nodiscard]] TaskKind task_kind(TaskId id);
/// Forecasting tasks cut one long signal into chronological splits.
[[nodiscard]] bool is_forecasting(TaskId id);

struct TaskConfig {
    TaskId task = TaskId::discrete_postcasting;
    std::size_t n_train = 100;
    std::size_t n_valid = 20;
    std::size_t n_test = 100;
    std::size_t sequence_length = 50;
    std::size_t delay = 5;
    std::size_t n_symbols = 3;
    std::size_t base_length = 4;
    double mask_ratio = 0.2;
    std::size_t n_markers = 5;
    std::size_t max_number = 3;
    std::size_t max_depth = 5;
    std::size_t forecast_length = 5;
    double training_ratio = 0.45;
    double validation_ratio = 0.1;
    double testing_ratio = 0.45;
    double modulation_index = 2.0; // sinus forecasting phase-modulation depth
    std::size_t batch_size = 10;
    std::size_t epochs = 250;
    std::size_t patience = 30;
    std::uint64_t seed = 0;
    std::string data_dir; // MNIST location; empty means $EST_LAB_DATA_DIR

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Benchmark defaults for a task (sample counts, lengths, training budget).
[[nodiscard]] TaskConfig default_task_config(TaskId id);

/// Serialises every field; the inverse starts from the task's defaults and
/// rejects unknown keys.
void to_json(nlohmann::json& j, const TaskConfig& c);
void from_json(const nlohmann::json& j, TaskConfig& c);

struct TaskDims {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::size_t length = 0; // T of every sample (forecasting: full signal length)
    TaskKind kind = TaskKind::discrete;
};

/// Single source of truth for model input/output widths.
[[nodiscard]] TaskDims dims(const TaskConfig& cfg);

struct TaskSample {
    Tensor inputs;                       // [T x input_dim]
    Tensor targets;                      // [T x output_dim]
    std::vector<std::uint8_t> eval_mask; // length T
    TaskKind kind = TaskKind::discrete;

    [[nodiscard]] std::size_t length() const { return eval_mask.size(); }
    [[nodiscard]] std::size_t evaluated() const;
};

struct Dataset {
    std::vector<TaskSample> train;
    std::vector<TaskSample> valid;
    std::vector<TaskSample> test;
};

/// Full train/valid/test generation from cfg.seed. Sequential MNIST reads IDX
/// files from cfg.data_dir or $EST_LAB_DATA_DIR.
[[nodiscard]] Dataset generate(const TaskConfig& cfg);

/// `count` independent samples of a non-forecasting, non-MNIST task.
[[nodiscard]] std::vector<TaskSample> generate_samples(const TaskConfig& cfg, std::size_t count,
                                                       std::uint64_t seed);

// Per-sample generators. Each consumes only `rng`.
TaskSample gen_discrete_postcasting(const TaskConfig& cfg, Rng& rng);
TaskSample gen_continuous_postcasting(const TaskConfig& cfg, Rng& rng);
TaskSample gen_discrete_pattern_completion(const TaskConfig& cfg, Rng& rng);
TaskSample gen_continuous_pattern_completion(const TaskConfig& cfg, Rng& rng);
TaskSample gen_simple_copy(const TaskConfig& cfg, Rng& rng);
TaskSample gen_selective_copy(const TaskConfig& cfg, Rng& rng);
TaskSample gen_adding_problem(const TaskConfig& cfg, Rng& rng);
TaskSample gen_sorting_problem(const TaskConfig& cfg, Rng& rng);
/// `valid` selects a balanced string or a corrupted one.
TaskSample gen_bracket_matching(const TaskConfig& cfg, bool valid, Rng& rng);

/// Number of masked positions for pattern completion (at least one).
[[nodiscard]] std::size_t pattern_mask_count(const TaskConfig& cfg);

// Forecasting signals. Both return sequence_length + forecast_length values.

/// Start time (seconds) of the sinus window for a seed.
[[nodiscard]] double sinus_start_time(std::uint64_t seed);
/// sin(2 pi 10 t + beta sin(2 pi 0.5 t)) at t = t0 + k * 0.01.
[[nodiscard]] std::vector<double> sinus_signal(const TaskConfig& cfg);
/// Lorenz initial condition (1, 1, 1) plus seeded jitter.
[[nodiscard]] std::array<double, 3> lorenz_initial_state(std::uint64_t seed);
/// Raw (unnormalised) Lorenz states after the discarded transient.
[[nodiscard]] std::vector<std::array<double, 3>> lorenz_trajectory(const TaskConfig& cfg);
inline constexpr std::size_t lorenz_transient_steps = 1000;
inline constexpr double forecasting_dt = 0.01;

Dataset gen_sinus_forecasting(const TaskConfig& cfg);
Dataset gen_chaotic_forecasting(const TaskConfig& cfg);

/// True when every ')' matches an earlier '(' and nothing is left open.
[[nodiscard]] bool brackets_balanced(std::string_view tokens);
/// Balanced string of sequence_length tokens with depth at most max_depth.
[[nodiscard]] std::string random_balanced_brackets(const TaskConfig& cfg, Rng& rng);
/// One seeded flip or swap, redrawn until the string is unbalanced.
[[nodiscard]] std::string corrupt_brackets(const std::string& valid, Rng& rng);
/// Encodes a bracket string; the label at the last step comes from brackets_balanced.
[[nodiscard]] TaskSample bracket_sample(const TaskConfig& cfg, std::string_view tokens);

/// Discrete: fraction of evaluated positions whose argmax differs from the
/// target's. Continuous: squared error averaged over evaluated rows and columns.
/// predictions[i] must have samples[i].targets' shape.
[[nodiscard]] double score(std::span<const TaskSample> samples, std::span<const Tensor> predictions);

} // namespace est::stream
