#include "est/stream/tasks.hpp"

#include "est/stream/mnist.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

namespace est::stream {

namespace {

struct TaskEntry {
    TaskId id;
    std::string_view name;
    TaskKind kind;
};

constexpr std::array<TaskEntry, 12> task_table{{
    {TaskId::discrete_postcasting, "discrete_postcasting", TaskKind::discrete},
    {TaskId::continuous_postcasting, "continuous_postcasting", TaskKind::continuous},
    {TaskId::sinus_forecasting, "sinus_forecasting", TaskKind::continuous},
    {TaskId::chaotic_forecasting, "chaotic_forecasting", TaskKind::continuous},
    {TaskId::discrete_pattern_completion, "discrete_pattern_completion", TaskKind::discrete},
    {TaskId::continuous_pattern_completion, "continuous_pattern_completion", TaskKind::continuous},
    {TaskId::simple_copy, "simple_copy", TaskKind::discrete},
    {TaskId::selective_copy, "selective_copy", TaskKind::discrete},
    {TaskId::adding_problem, "adding_problem", TaskKind::discrete},
    {TaskId::sorting_problem, "sorting_problem", TaskKind::discrete},
    {TaskId::sequential_mnist, "sequential_mnist", TaskKind::discrete},
    {TaskId::bracket_matching, "bracket_matching", TaskKind::discrete},
}};

const TaskEntry& entry(TaskId id) {
    for (const auto& e : task_table) {
        if (e.id == id) {
            return e;
        }
    }
    throw ConfigError("unknown task id");
}

// Row-major buffers for one sample, turned into tensors at the end.
struct SampleBuilder {
    std::size_t length, in, out;
    std::vector<double> inputs, targets;
    std::vector<std::uint8_t> mask;
    TaskKind kind;

    SampleBuilder(const TaskDims& d)
        : length(d.length), in(d.input_dim), out(d.output_dim), inputs(d.length * d.input_dim, 0.0),
          targets(d.length * d.output_dim, 0.0), mask(d.length, 0), kind(d.kind) {}

    double& input(std::size_t t, std::size_t c) { return inputs[t * in + c]; }
    double& target(std::size_t t, std::size_t c) { return targets[t * out + c]; }
    void evaluate_class(std::size_t t, std::size_t cls) {
        target(t, cls) = 1.0;
        mask[t] = 1;
    }
    void evaluate_value(std::size_t t, double v) {
        target(t, 0) = v;
        mask[t] = 1;
    }

    TaskSample finish() {
        return {Tensor::from(length, in, std::move(inputs)), Tensor::from(length, out, std::move(targets)),
                std::move(mask), kind};
    }
};

std::vector<std::size_t> distinct_sorted(std::size_t n, std::size_t k, std::size_t offset, Rng& rng) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), offset);
    for (std::size_t i = 0; i < k; ++i) {
        std::swap(pool[i], pool[i + uniform_index(rng, n - i)]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::size_t pattern_eligible_start(const TaskConfig& cfg) {
    return cfg.base_length < cfg.sequence_length ? cfg.base_length : 0;
}

std::vector<std::size_t> pattern_mask_positions(const TaskConfig& cfg, Rng& rng) {
    const std::size_t start = pattern_eligible_start(cfg);
    return distinct_sorted(cfg.sequence_length - start, pattern_mask_count(cfg), start, rng);
}

std::vector<TaskSample> draw(const TaskConfig& cfg, std::size_t count, Rng& rng) {
    std::vector<TaskSample> out;
    out.reserve(count);
    if (cfg.task == TaskId::bracket_matching) {
        std::vector<bool> labels(count, false);
        std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(count / 2), true);
        std::shuffle(labels.begin(), labels.end(), rng);
        for (bool valid : labels) {
            out.push_back(gen_bracket_matching(cfg, valid, rng));
        }
        return out;
    }
    TaskSample (*fn)(const TaskConfig&, Rng&) = nullptr;
    switch (cfg.task) {
    case TaskId::discrete_postcasting: fn = gen_discrete_postcasting; break;
    case TaskId::continuous_postcasting: fn = gen_continuous_postcasting; break;
    case TaskId::discrete_pattern_completion: fn = gen_discrete_pattern_completion; break;
    case TaskId::continuous_pattern_completion: fn = gen_continuous_pattern_completion; break;
    case TaskId::simple_copy: fn = gen_simple_copy; break;
    case TaskId::selective_copy: fn = gen_selective_copy; break;
    case TaskId::adding_problem: fn = gen_adding_problem; break;
    case TaskId::sorting_problem: fn = gen_sorting_problem; break;
    default:
        throw UsageError(fmt::format("{} samples are not drawn independently", task_name(cfg.task)));
    }
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(fn(cfg, rng));
    }
    return out;
}

// Cuts [L + f] x d signal rows into chronological splits with targets f ahead.
Dataset split_signal(const TaskConfig& cfg, const std::vector<double>& rows, std::size_t d) {
    const std::size_t total = cfg.sequence_length, f = cfg.forecast_length;
    const auto n_train = static_cast<std::size_t>(std::llround(cfg.training_ratio * static_cast<double>(total)));
    const auto n_valid = static_cast<std::size_t>(std::llround(cfg.validation_ratio * static_cast<double>(total)));
    auto cut = [&](std::size_t begin, std::size_t len) {
        std::vector<double> in(rows.begin() + static_cast<std::ptrdiff_t>(begin * d),
                               rows.begin() + static_cast<std::ptrdiff_t>((begin + len) * d));
        std::vector<double> tg(rows.begin() + static_cast<std::ptrdiff_t>((begin + f) * d),
                               rows.begin() + static_cast<std::ptrdiff_t>((begin + f + len) * d));
        return TaskSample{Tensor::from(len, d, std::move(in)), Tensor::from(len, d, std::move(tg)),
                          std::vector<std::uint8_t>(len, 1), TaskKind::continuous};
    };
    Dataset data;
    data.train.push_back(cut(0, n_train));
    data.valid.push_back(cut(n_train, n_valid));
    data.test.push_back(cut(n_train + n_valid, total - n_train - n_valid));
    return data;
}

template <typename T>
void read_field(const nlohmann::json& j, std::string_view key, T& out) {
    try {
        out = j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(fmt::format("task config: field '{}' has the wrong type ({})", key, j.dump()));
    }
}

} // namespace

std::string_view task_name(TaskId id) { return entry(id).name; }

TaskId parse_task(std::string_view name) {
    for (const auto& e : task_table) {
        if (e.name == name) {
            return e.id;
        }
    }
    throw ConfigError(fmt::format("unknown task '{}'", name));
}

TaskKind task_kind(TaskId id) { return entry(id).kind; }

bool is_forecasting(TaskId id) { return id == TaskId::sinus_forecasting || id == TaskId::chaotic_forecasting; }

TaskConfig default_task_config(TaskId id) {
    TaskConfig c;
    c.task = id;
    switch (id) {
    case TaskId::discrete_postcasting:
    case TaskId::continuous_postcasting:
        c.sequence_length = 50;
        c.delay = 5;
        break;
    case TaskId::sinus_forecasting:
    case TaskId::chaotic_forecasting:
        c.sequence_length = 200;
        c.forecast_length = 5;
        c.batch_size = 1;
        break;
    case TaskId::discrete_pattern_completion:
    case TaskId::continuous_pattern_completion:
        c.sequence_length = 60;
        c.base_length = 4;
        c.mask_ratio = 0.2;
        break;
    case TaskId::simple_copy:
        c.sequence_length = 22;
        c.delay = 5;
        break;
    case TaskId::selective_copy:
        c.sequence_length = 40;
        c.delay = 5;
        c.n_markers = 5;
        break;
    case TaskId::adding_problem:
        c.sequence_length = 10;
        c.max_number = 3;
        break;
    case TaskId::sorting_problem:
        c.sequence_length = 10;
        break;
    case TaskId::sequential_mnist:
        c.sequence_length = 28;
        break;
    case TaskId::bracket_matching:
        c.sequence_length = 50;
        c.max_depth = 5;
        break;
    }
    return c;
}

void TaskConfig::validate() const {
    auto positive = [](std::size_t v, std::string_view field) {
        if (v == 0) {
            throw ConfigError(fmt::format("task config: {} must be positive", field));
        }
    };
    positive(sequence_length, "sequence_length");
    positive(batch_size, "batch_size");
    positive(epochs, "epochs");
    if (patience < 1 || patience > epochs) {
        throw ConfigError(fmt::format("task config: patience must lie in [1, epochs], got {}", patience));
    }
    if (is_forecasting(task)) {
        for (double r : {training_ratio, validation_ratio, testing_ratio}) {
            if (!(r > 0.0)) {
                throw ConfigError("task config: forecasting ratios must be positive");
            }
        }
        if (std::abs(training_ratio + validation_ratio + testing_ratio - 1.0) > 1e-9) {
            throw ConfigError(fmt::format("task config: ratios sum to {}, expected 1",
                                          training_ratio + validation_ratio + testing_ratio));
        }
        const double total = static_cast<double>(sequence_length);
        const auto tr = std::llround(training_ratio * total), va = std::llround(validation_ratio * total);
        if (tr < 1 || va < 1 || tr + va >= static_cast<long long>(sequence_length)) {
            throw ConfigError("task config: sequence_length too short for the forecasting split ratios");
        }
        if (!std::isfinite(modulation_index)) {
            throw ConfigError("task config: modulation_index must be finite");
        }
        return;
    }
    positive(n_train, "n_train");
    positive(n_valid, "n_valid");
    positive(n_test, "n_test");
    switch (task) {
    case TaskId::discrete_postcasting:
    case TaskId::continuous_postcasting:
        if (delay >= sequence_length) {
            throw ConfigError(fmt::format("task config: delay {} must be smaller than sequence_length {}", delay,
                                          sequence_length));
        }
        break;
    case TaskId::discrete_pattern_completion:
    case TaskId::continuous_pattern_completion:
        positive(base_length, "base_length");
        if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) {
            throw ConfigError(fmt::format("task config: mask_ratio must lie in [0, 1), got {}", mask_ratio));
        }
        break;
    case TaskId::selective_copy:
        if (n_markers < 1 || n_markers > sequence_length) {
            throw ConfigError(fmt::format("task config: n_markers must lie in [1, sequence_length], got {}",
                                          n_markers));
        }
        break;
    case TaskId::adding_problem:
        positive(max_number, "max_number");
        if (sequence_length < 2) {
            throw ConfigError("task config: adding_problem needs sequence_length >= 2 for two markers");
        }
        break;
    case TaskId::bracket_matching:
        positive(max_depth, "max_depth");
        if (sequence_length % 2 != 0) {
            throw ConfigError(fmt::format("task config: bracket_matching needs an even sequence_length, got {}",
                                          sequence_length));
        }
        break;
    default:
        break;
    }
    switch (task) {
    case TaskId::discrete_postcasting:
    case TaskId::discrete_pattern_completion:
    case TaskId::simple_copy:
    case TaskId::selective_copy:
    case TaskId::sorting_problem:
        positive(n_symbols, "n_symbols");
        break;
    default:
        break;
    }
}

void to_json(nlohmann::json& j, const TaskConfig& c) {
    j = nlohmann::json{{"task", task_name(c.task)},
                       {"n_train", c.n_train},
                       {"n_valid", c.n_valid},
                       {"n_test", c.n_test},
                       {"sequence_length", c.sequence_length},
                       {"delay", c.delay},
                       {"n_symbols", c.n_symbols},
                       {"base_length", c.base_length},
                       {"mask_ratio", c.mask_ratio},
                       {"n_markers", c.n_markers},
                       {"max_number", c.max_number},
                       {"max_depth", c.max_depth},
                       {"forecast_length", c.forecast_length},
                       {"training_ratio", c.training_ratio},
                       {"validation_ratio", c.validation_ratio},
                       {"testing_ratio", c.testing_ratio},
                       {"modulation_index", c.modulation_index},
                       {"batch_size", c.batch_size},
                       {"epochs", c.epochs},
                       {"patience", c.patience},
                       {"seed", c.seed},
                       {"data_dir", c.data_dir}};
}

void from_json(const nlohmann::json& j, TaskConfig& c) {
    if (!j.is_object()) {
        throw ConfigError("task config must be an object");
    }
    if (!j.contains("task")) {
        throw ConfigError("task config: missing required field 'task'");
    }
    std::string name;
    read_field(j.at("task"), "task", name);
    c = default_task_config(parse_task(name));
    for (const auto& [key, value] : j.items()) {
        if (key == "task") {
            continue;
        }
        if (key == "n_train") read_field(value, key, c.n_train);
        else if (key == "n_valid") read_field(value, key, c.n_valid);
        else if (key == "n_test") read_field(value, key, c.n_test);
        else if (key == "sequence_length") read_field(value, key, c.sequence_length);
        else if (key == "delay") read_field(value, key, c.delay);
        else if (key == "n_symbols") read_field(value, key, c.n_symbols);
        else if (key == "base_length") read_field(value, key, c.base_length);
        else if (key == "mask_ratio") read_field(value, key, c.mask_ratio);
        else if (key == "n_markers") read_field(value, key, c.n_markers);
        else if (key == "max_number") read_field(value, key, c.max_number);
        else if (key == "max_depth") read_field(value, key, c.max_depth);
        else if (key == "forecast_length") read_field(value, key, c.forecast_length);
        else if (key == "training_ratio") read_field(value, key, c.training_ratio);
        else if (key == "validation_ratio") read_field(value, key, c.validation_ratio);
        else if (key == "testing_ratio") read_field(value, key, c.testing_ratio);
        else if (key == "modulation_index") read_field(value, key, c.modulation_index);
        else if (key == "batch_size") read_field(value, key, c.batch_size);
        else if (key == "epochs") read_field(value, key, c.epochs);
        else if (key == "patience") read_field(value, key, c.patience);
        else if (key == "seed") read_field(value, key, c.seed);
        else if (key == "data_dir") read_field(value, key, c.data_dir);
        else throw ConfigError(fmt::format("task config: unknown key '{}'", key));
    }
}

TaskDims dims(const TaskConfig& c) {
    const std::size_t l = c.sequence_length, s = c.n_symbols;
    const TaskKind k = task_kind(c.task);
    switch (c.task) {
    case TaskId::discrete_postcasting: return {s, s, l, k};
    case TaskId::continuous_postcasting: return {1, 1, l, k};
    case TaskId::sinus_forecasting: return {1, 1, l, k};
    case TaskId::chaotic_forecasting: return {3, 3, l, k};
    case TaskId::discrete_pattern_completion: return {s + 2, s, l, k};
    case TaskId::continuous_pattern_completion: return {1, 1, l, k};
    case TaskId::simple_copy: return {s + 1, s, 2 * l + c.delay, k};
    case TaskId::selective_copy: return {s + 2, s, l + c.delay + c.n_markers, k};
    case TaskId::adding_problem: return {c.max_number + 2, 2 * c.max_number - 1, l + 1, k};
    case TaskId::sorting_problem: return {s + l + 1, s, 2 * l, k};
    case TaskId::sequential_mnist: return {29, 10, 29, k};
    case TaskId::bracket_matching: return {2, 2, l, k};
    }
    throw ConfigError("unknown task id");
}

std::size_t TaskSample::evaluated() const {
    return static_cast<std::size_t>(std::count(eval_mask.begin(), eval_mask.end(), std::uint8_t{1}));
}

TaskSample gen_discrete_postcasting(const TaskConfig& cfg, Rng& rng) {
    SampleBuilder b(dims(cfg));
    std::vector<std::size_t> sym(cfg.sequence_length);
    for (std::size_t t = 0; t < sym.size(); ++t) {
        sym[t] = uniform_index(rng, cfg.n_symbols);
        b.input(t, sym[t]) = 1.0;
        if (t >= cfg.delay) {
            b.evaluate_class(t, sym[t - cfg.delay]);
        }
    }
    return b.finish();
}

TaskSample gen_continuous_postcasting(const TaskConfig& cfg, Rng& rng) {
    SampleBuilder b(dims(cfg));
    std::vector<double> x(cfg.sequence_length);
    for (std::size_t t = 0; t < x.size(); ++t) {
        x[t] = uniform(rng, -0.8, 0.8);
        b.input(t, 0) = x[t];
        if (t >= cfg.delay) {
            b.evaluate_value(t, x[t - cfg.delay]);
        }
    }
    return b.finish();
}

std::size_t pattern_mask_count(const TaskConfig& cfg) {
    const std::size_t eligible = cfg.sequence_length - pattern_eligible_start(cfg);
    const auto wanted = static_cast<std::size_t>(
        std::llround(cfg.mask_ratio * static_cast<double>(cfg.sequence_length)));
    return std::clamp<std::size_t>(wanted, 1, eligible);
}

TaskSample gen_discrete_pattern_completion(const TaskConfig& cfg, Rng& rng) {
    SampleBuilder b(dims(cfg));
    std::vector<std::size_t> base(cfg.base_length);
    for (auto& s : base) {
        s = uniform_index(rng, cfg.n_symbols);
    }
    const auto masked = pattern_mask_positions(cfg, rng);
    std::size_t next = 0;
    for (std::size_t t = 0; t < cfg.sequence_length; ++t) {
        const std::size_t sym = base[t % base.size()];
        if (next < masked.size() && masked[next] == t) {
            b.input(t, cfg.n_symbols) = 1.0;
            b.input(t, cfg.n_symbols + 1) = 1.0;
            b.evaluate_class(t, sym);
            ++next;
        } else {
            b.input(t, sym) = 1.0;
        }
    }
    return b.finish();
}

TaskSample gen_continuous_pattern_completion(const TaskConfig& cfg, Rng& rng) {
    SampleBuilder b(dims(cfg));
    std::vector<double> base(cfg.base_length);
    for (auto& v : base) {
        v = uniform(rng, 0.0, 0.8);
    }
    const auto masked = pattern_mask_positions(cfg, rng);
    std::size_t next = 0;
    for (std::size_t t = 0; t < cfg.sequence_length; ++t) {
        const double v = base[t % base.size()];
        if (next < masked.size() && masked[next] == t) {
            b.input(t, 0) = -1.0;
            b.evaluate_value(t, v);
            ++next;
        } else {
            b.input(t, 0) = v;
        }
    }
    return b.finish();
}

TaskSample gen_simple_copy(const TaskConfig& cfg, Rng& rng) {
    SampleBuilder b(dims(cfg));
    const std::size_t l = cfg.sequence_length, start = l + cfg.delay;
    std::vector<std::size_t> sym(l);
    for (std::size_t t = 0; t < l; ++t) {
        sym[t] = uniform_index(rng, cfg.n_symbols);
        b.input(t, sym[t]) = 1.0;
    }
    b.input(start, cfg.n_symbols) = 1.0;
    for (std::size_t k = 0; k < l; ++k) {
        b.evaluate_class(start + k, sym[k]);
    }
    return b.finish();
}

TaskSample gen_selective_copy(const TaskConfig& cfg, Rng& rng) {
    SampleBuilder b(dims(cfg));
    const std::size_t l = cfg.sequence_length, start = l + cfg.delay;
    std::vector<std::size_t> sym(l);
    for (std::size_t t = 0; t < l; ++t) {
        sym[t] = uniform_index(rng, cfg.n_symbols);
        b.input(t, sym[t]) = 1.0;
    }
    const auto marked = distinct_sorted(l, cfg.n_markers, 0, rng);
    for (std::size_t p : marked) {
        b.input(p, cfg.n_symbols) = 1.0;
    }
    b.input(start, cfg.n_symbols + 1) = 1.0;
    for (std::size_t k = 0; k < marked.size(); ++k) {
        b.evaluate_class(start + k, sym[marked[k]]);
    }
    return b.finish();
}

TaskSample gen_adding_problem(const TaskConfig& cfg, Rng& rng) {
    SampleBuilder b(dims(cfg));
    const std::size_t l = cfg.sequence_length, m = cfg.max_number;
    std::vector<std::size_t> num(l);
    for (std::size_t t = 0; t < l; ++t) {
        num[t] = uniform_index(rng, m);
        b.input(t, num[t]) = 1.0;
    }
    const auto marked = distinct_sorted(l, 2, 0, rng);
    for (std::size_t p : marked) {
        b.input(p, m) = 1.0;
    }
    b.input(l, m + 1) = 1.0;
    b.evaluate_class(l, num[marked[0]] + num[marked[1]]);
    return b.finish();
}

TaskSample gen_sorting_problem(const TaskConfig& cfg, Rng& rng) {
    SampleBuilder b(dims(cfg));
    const std::size_t l = cfg.sequence_length, s = cfg.n_symbols;
    std::vector<std::size_t> sym(l), pos(l);
    for (auto& v : sym) {
        v = uniform_index(rng, s);
    }
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    std::shuffle(pos.begin(), pos.end(), rng);
    std::vector<std::size_t> by_position(l);
    for (std::size_t t = 0; t < l; ++t) {
        b.input(t, sym[t]) = 1.0;
        b.input(t, s + pos[t]) = 1.0;
        by_position[pos[t]] = sym[t];
    }
    b.input(l, s + l) = 1.0;
    for (std::size_t k = 0; k < l; ++k) {
        b.evaluate_class(l + k, by_position[k]);
    }
    return b.finish();
}

bool brackets_balanced(std::string_view tokens) {
    long depth = 0;
    for (char ch : tokens) {
        if (ch == '(') {
            ++depth;
        } else if (ch == ')') {
            if (--depth < 0) {
                return false;
            }
        } else {
            throw DataError(fmt::format("bracket string contains '{}'", ch));
        }
    }
    return depth == 0;
}

std::string random_balanced_brackets(const TaskConfig& cfg, Rng& rng) {
    const std::size_t l = cfg.sequence_length;
    // Random walk that never exceeds max_depth and can always close in time.
    std::string tokens(l, ')');
    std::size_t depth = 0;
    for (std::size_t t = 0; t < l; ++t) {
        const std::size_t remaining = l - t;
        const bool can_open = depth + 1 <= cfg.max_depth && depth + 1 <= remaining - 1;
        const bool can_close = depth > 0;
        const bool open = can_open && (!can_close || uniform_index(rng, 2) == 0);
        tokens[t] = open ? '(' : ')';
        depth = open ? depth + 1 : depth - 1;
    }
    return tokens;
}

std::string corrupt_brackets(const std::string& valid, Rng& rng) {
    const std::size_t l = valid.size();
    std::string tokens;
    do {
        tokens = valid;
        if (uniform_index(rng, 2) == 0) {
            const std::size_t i = uniform_index(rng, l);
            tokens[i] = tokens[i] == '(' ? ')' : '(';
        } else {
            std::swap(tokens[uniform_index(rng, l)], tokens[uniform_index(rng, l)]);
        }
    } while (brackets_balanced(tokens));
    return tokens;
}

TaskSample bracket_sample(const TaskConfig& cfg, std::string_view tokens) {
    SampleBuilder b(dims(cfg));
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        b.input(t, tokens[t] == '(' ? 0 : 1) = 1.0;
    }
    b.evaluate_class(tokens.size() - 1, brackets_balanced(tokens) ? 1 : 0);
    return b.finish();
}

TaskSample gen_bracket_matching(const TaskConfig& cfg, bool valid, Rng& rng) {
    std::string tokens = random_balanced_brackets(cfg, rng);
    if (!valid) {
        tokens = corrupt_brackets(tokens, rng);
    }
    return bracket_sample(cfg, tokens);
}

double sinus_start_time(std::uint64_t seed) {
    Rng rng = make_rng(seed, "stream.sinus");
    return uniform(rng, 0.0, 2.0);
}

std::vector<double> sinus_signal(const TaskConfig& cfg) {
    const double t0 = sinus_start_time(cfg.seed);
    const std::size_t n = cfg.sequence_length + cfg.forecast_length;
    std::vector<double> s(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = t0 + static_cast<double>(k) * forecasting_dt;
        s[k] = std::sin(2.0 * std::numbers::pi * 10.0 * t +
                        cfg.modulation_index * std::sin(2.0 * std::numbers::pi * 0.5 * t));
    }
    return s;
}

std::array<double, 3> lorenz_initial_state(std::uint64_t seed) {
    Rng rng = make_rng(seed, "stream.lorenz");
    std::array<double, 3> x{1.0, 1.0, 1.0};
    for (auto& v : x) {
        v += uniform(rng, -0.01, 0.01);
    }
    return x;
}

std::vector<std::array<double, 3>> lorenz_trajectory(const TaskConfig& cfg) {
    using State = std::array<double, 3>;
    constexpr double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0, h = forecasting_dt;
    auto f = [&](const State& s) {
        return State{sigma * (s[1] - s[0]), s[0] * (rho - s[2]) - s[1], s[0] * s[1] - beta * s[2]};
    };
    auto axpy = [](const State& s, double a, const State& d) {
        return State{s[0] + a * d[0], s[1] + a * d[1], s[2] + a * d[2]};
    };
    auto rk4 = [&](const State& s) {
        const State k1 = f(s);
        const State k2 = f(axpy(s, h / 2, k1));
        const State k3 = f(axpy(s, h / 2, k2));
        const State k4 = f(axpy(s, h, k3));
        State out;
        for (int i = 0; i < 3; ++i) {
            out[i] = s[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        }
        return out;
    };
    State s = lorenz_initial_state(cfg.seed);
    for (std::size_t k = 0; k < lorenz_transient_steps; ++k) {
        s = rk4(s);
    }
    std::vector<State> out(cfg.sequence_length + cfg.forecast_length);
    for (auto& row : out) {
        row = s;
        s = rk4(s);
    }
    return out;
}

Dataset gen_sinus_forecasting(const TaskConfig& cfg) {
    cfg.validate();
    return split_signal(cfg, sinus_signal(cfg), 1);
}

Dataset gen_chaotic_forecasting(const TaskConfig& cfg) {
    cfg.validate();
    const auto traj = lorenz_trajectory(cfg);
    std::array<double, 3> lo{}, hi{};
    for (int d = 0; d < 3; ++d) {
        lo[d] = hi[d] = traj[0][d];
        for (const auto& s : traj) {
            lo[d] = std::min(lo[d], s[d]);
            hi[d] = std::max(hi[d], s[d]);
        }
    }
    std::vector<double> rows;
    rows.reserve(traj.size() * 3);
    for (const auto& s : traj) {
        for (int d = 0; d < 3; ++d) {
            rows.push_back(2.0 * (s[d] - lo[d]) / (hi[d] - lo[d]) - 1.0);
        }
    }
    return split_signal(cfg, rows, 3);
}

std::vector<TaskSample> generate_samples(const TaskConfig& cfg, std::size_t count, std::uint64_t seed) {
    cfg.validate();
    Rng rng = make_rng(seed, "stream.samples");
    return draw(cfg, count, rng);
}

Dataset generate(const TaskConfig& cfg) {
    cfg.validate();
    switch (cfg.task) {
    case TaskId::sinus_forecasting: return gen_sinus_forecasting(cfg);
    case TaskId::chaotic_forecasting: return gen_chaotic_forecasting(cfg);
    case TaskId::sequential_mnist: return gen_sequential_mnist(cfg, load_mnist(mnist_directory(cfg)));
    default: break;
    }
    Rng train = make_rng(cfg.seed, "stream.train");
    Rng valid = make_rng(cfg.seed, "stream.valid");
    Rng test = make_rng(cfg.seed, "stream.test");
    return {draw(cfg, cfg.n_train, train), draw(cfg, cfg.n_valid, valid), draw(cfg, cfg.n_test, test)};
}

namespace {

std::size_t argmax_row(std::span<const double> data, std::size_t row, std::size_t cols) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
        if (data[row * cols + c] > data[row * cols + best]) {
            best = c;
        }
    }
    return best;
}

} // namespace

double score(std::span<const TaskSample> samples, std::span<const Tensor> predictions) {
    if (samples.size() != predictions.size()) {
        throw DimensionError(fmt::format("score: {} samples but {} predictions", samples.size(),
                                         predictions.size()));
    }
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const auto& p = predictions[i];
        if (p.shape() != s.targets.shape()) {
            throw DimensionError(fmt::format("score: prediction {} does not match target {} (sample {})",
                                             to_string(p.shape()), to_string(s.targets.shape()), i));
        }
        const std::size_t cols = p.cols();
        const auto pd = p.data();
        const auto td = s.targets.data();
        for (std::size_t t = 0; t < s.length(); ++t) {
            if (s.eval_mask[t] == 0) {
                continue;
            }
            if (s.kind == TaskKind::discrete) {
                total += argmax_row(pd, t, cols) != argmax_row(td, t, cols) ? 1.0 : 0.0;
                ++count;
            } else {
                for (std::size_t c = 0; c < cols; ++c) {
                    const double d = pd[t * cols + c] - td[t * cols + c];
                    total += d * d;
                }
                count += cols;
            }
        }
    }
    if (count == 0) {
        throw DimensionError("score: no evaluated positions");
    }
    return total / static_cast<double>(count);
}

} // namespace est::stream
