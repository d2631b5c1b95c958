#include "est/training/sweep.hpp"

#include "est/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <set>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>

namespace est {

void to_json(nlohmann::json& j, const TrainOverrides& o) {
    j = nlohmann::json::object();
    if (o.batch_size) j["batch_size"] = *o.batch_size;
    if (o.epochs) j["epochs"] = *o.epochs;
    if (o.patience) j["patience"] = *o.patience;
    if (o.weight_decay) j["weight_decay"] = *o.weight_decay;
    if (o.clip_norm) j["clip_norm"] = *o.clip_norm;
}

void from_json(const nlohmann::json& j, TrainOverrides& o) {
    if (!j.is_object()) {
        throw ConfigError("train: expected an object");
    }
    o = {};
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "batch_size") {
                o.batch_size = value.get<std::size_t>();
            } else if (key == "epochs") {
                o.epochs = value.get<std::size_t>();
            } else if (key == "patience") {
                o.patience = value.get<std::size_t>();
            } else if (key == "weight_decay") {
                o.weight_decay = value.get<double>();
            } else if (key == "clip_norm") {
                o.clip_norm = value.get<double>();
            } else {
                throw ConfigError(fmt::format("train.{}: unknown key", key));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(fmt::format("train.{}: {}", key, e.what()));
        }
    }
}

TrainConfig make_train_config(const stream::TaskConfig& task, double learning_rate, std::uint64_t seed,
                              const TrainOverrides& overrides) {
    TrainConfig c;
    c.learning_rate = learning_rate;
    c.seed = seed;
    c.batch_size = overrides.batch_size.value_or(task.batch_size);
    c.epochs = overrides.epochs.value_or(task.epochs);
    c.patience = overrides.patience.value_or(std::min(task.patience, c.epochs));
    c.weight_decay = overrides.weight_decay.value_or(c.weight_decay);
    c.clip_norm = overrides.clip_norm.value_or(c.clip_norm);
    c.validate();
    return c;
}

RunRecord run_named(const NamedModel& m, const stream::TaskConfig& task, const stream::Dataset& data,
                    const TrainConfig& cfg, const EpochCallback& on_epoch, std::unique_ptr<SequenceModel>* trained) {
    const auto d = stream::dims(task);
    auto model = make_model(instantiate(m, d.input_dim, d.output_dim, cfg.seed, d.length));
    RunRecord r = train(*model, data, cfg, on_epoch);
    r.task = std::string(stream::task_name(task.task));
    r.family = m.family;
    r.size = m.size;
    r.config_id = m.name;
    if (trained) {
        *trained = std::move(model);
    }
    return r;
}

std::vector<std::string> select_models(std::span<const std::string> families, std::span<const std::string> sizes) {
    std::vector<std::string> out;
    for (const auto& m : model_zoo()) {
        if (std::find(families.begin(), families.end(), m.family) != families.end() &&
            std::find(sizes.begin(), sizes.end(), m.size) != sizes.end()) {
            out.push_back(m.name);
        }
    }
    return out;
}

void SweepSpec::validate() const {
    if (tasks.empty() || models.empty() || learning_rates.empty() || seeds.empty()) {
        throw ConfigError("sweep: tasks, models, learning_rates and seeds must all be nonempty");
    }
    std::set<std::string_view> task_names;
    for (const auto& t : tasks) {
        t.validate();
        if (!task_names.insert(stream::task_name(t.task)).second) {
            throw ConfigError(fmt::format("sweep: task {} listed twice", stream::task_name(t.task)));
        }
    }
    std::set<std::string_view> names;
    for (const auto& m : models) {
        (void)find_model(m);
        if (!names.insert(m).second) {
            throw ConfigError(fmt::format("sweep: model {} listed twice", m));
        }
    }
    if (std::set<double>(learning_rates.begin(), learning_rates.end()).size() != learning_rates.size()) {
        throw ConfigError("sweep: learning_rates contains duplicates");
    }
    for (double lr : learning_rates) {
        if (!(lr > 0.0) || !std::isfinite(lr)) {
            throw ConfigError(fmt::format("sweep: learning rate {} must be positive", lr));
        }
    }
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw ConfigError("sweep: seeds contains duplicates");
    }
    for (const auto& t : tasks) {
        (void)make_train_config(t, learning_rates.front(), seeds.front(), train);
    }
}

std::vector<SweepCell> expand(const SweepSpec& spec) {
    std::vector<SweepCell> cells;
    cells.reserve(spec.tasks.size() * spec.models.size() * spec.learning_rates.size() * spec.seeds.size());
    for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
        for (const auto& name : spec.models) {
            const NamedModel& m = find_model(name);
            for (double lr : spec.learning_rates) {
                for (std::uint64_t seed : spec.seeds) {
                    cells.push_back({t, &m, lr, seed});
                }
            }
        }
    }
    return cells;
}

std::string cell_key(std::string_view task, std::string_view config_id, double learning_rate, std::uint64_t seed) {
    RunRecord r;
    r.task = task;
    r.config_id = config_id;
    r.learning_rate = learning_rate;
    r.seed = seed;
    return r.key();
}

SweepResult sweep(const SweepSpec& spec, const std::filesystem::path& store_path, const SweepOptions& options) {
    spec.validate();
    if (options.workers == 0) {
        throw ConfigError("sweep: workers must be at least 1");
    }
    ResultsStore store(store_path, options.resume);
    std::unordered_set<std::string> done;
    for (const auto& r : store.existing()) {
        done.insert(r.key());
    }

    const auto cells = expand(spec);
    SweepResult result;
    result.total = cells.size();
    std::vector<SweepCell> pending;
    for (const auto& c : cells) {
        if (done.count(cell_key(stream::task_name(spec.tasks[c.task_index].task), c.model->name, c.learning_rate,
                                c.seed))) {
            ++result.skipped;
        } else {
            pending.push_back(c);
        }
    }
    if (options.max_new_runs > 0 && pending.size() > options.max_new_runs) {
        pending.resize(options.max_new_runs);
    }

    // Datasets depend only on the task config, so every run of a task shares one.
    std::vector<std::optional<stream::Dataset>> datasets(spec.tasks.size());
    for (const auto& c : pending) {
        if (!datasets[c.task_index]) {
            datasets[c.task_index] = stream::generate(spec.tasks[c.task_index]);
        }
    }

    std::atomic<std::size_t> next{0};
    std::mutex report_mutex;
    std::size_t finished = result.skipped;
    std::exception_ptr fatal;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= pending.size()) {
                return;
            }
            const SweepCell& c = pending[i];
            const auto& task = spec.tasks[c.task_index];
            RunRecord r;
            const auto start = std::chrono::steady_clock::now();
            try {
                const TrainConfig cfg = make_train_config(task, c.learning_rate, c.seed, spec.train);
                r = run_named(*c.model, task, *datasets[c.task_index], cfg);
            } catch (const std::exception& e) {
                r.task = std::string(stream::task_name(task.task));
                r.family = c.model->family;
                r.size = c.model->size;
                r.config_id = c.model->name;
                r.learning_rate = c.learning_rate;
                r.seed = c.seed;
                r.val_error = std::numeric_limits<double>::quiet_NaN();
                r.test_error = std::numeric_limits<double>::quiet_NaN();
                r.status = "failed";
                r.message = e.what();
                r.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                                  start)
                                .count();
            }
            std::lock_guard lock(report_mutex);
            try {
                store.append(r);
            } catch (...) {
                if (!fatal) {
                    fatal = std::current_exception();
                }
                next.store(pending.size());
                return;
            }
            ++result.executed;
            if (!r.ok()) {
                ++result.failed;
            }
            ++finished;
            if (options.on_record) {
                options.on_record(r, finished, result.total);
            }
        }
    };

    const std::size_t n_threads = std::min(options.workers, std::max<std::size_t>(pending.size(), 1));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        for (std::size_t t = 0; t < n_threads; ++t) {
            threads.emplace_back(worker);
        }
    }
    if (fatal) {
        std::rethrow_exception(fatal);
    }
    return result;
}

} // namespace est
