// est_lab: generate benchmark data, train and evaluate models, run sweeps and
// summarise results. Exit codes: 0 success, 2 configuration error, 3 data
// error, 4 runtime failure (including a failed training run).

#include "est/cli/experiment.hpp"
#include "est/stream/dataset_io.hpp"
#include "est/training/aggregate.hpp"
#include "est/training/checkpoint.hpp"
#include "est/training/report.hpp"
#include "est/training/results.hpp"
#include "est/training/sweep.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace est;

constexpr int exit_config = 2;
constexpr int exit_data = 3;
constexpr int exit_runtime = 4;

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    bool resume = false;
    std::string checkpoint;
    std::string task;
    std::string model;
    std::optional<double> learning_rate;
    std::string split = "test";
    std::string results;
    std::size_t input_dim = 4;
    std::size_t output_dim = 4;
    bool verbose = false;
};

cli::ExperimentSpec resolve(const Options& o) {
    cli::ExperimentSpec spec;
    if (!o.config.empty()) {
        spec = cli::load_experiment(o.config);
    }
    if (!o.task.empty()) {
        spec.tasks = {stream::default_task_config(stream::parse_task(o.task))};
    }
    if (!o.model.empty()) {
        (void)find_model(o.model);
        spec.models = {o.model};
    }
    if (o.learning_rate) {
        spec.learning_rates = {*o.learning_rate};
    }
    if (o.seed) {
        spec.seeds = {*o.seed};
    }
    return spec;
}

std::filesystem::path require_out(const Options& o, std::string_view command) {
    if (o.out.empty()) {
        throw ConfigError(fmt::format("{}: --out is required", command));
    }
    return o.out;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    if (file.has_parent_path()) {
        std::filesystem::create_directories(file.parent_path());
    }
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw DataError(fmt::format("cannot write {}", file.string()));
    }
}

int cmd_generate(const Options& o) {
    const auto spec = resolve(o);
    stream::TaskConfig task = spec.single_task();
    if (o.seed) {
        task.seed = *o.seed;
    }
    task.validate();
    const auto out = require_out(o, "generate");
    const auto data = stream::generate(task);
    stream::export_dataset(out, task, data);
    const auto d = stream::dims(task);
    fmt::print("{}: train={} valid={} test={} length={} input_dim={} output_dim={} -> {}\n",
               stream::task_name(task.task), data.train.size(), data.valid.size(), data.test.size(), d.length,
               d.input_dim, d.output_dim, out.string());
    return 0;
}

int cmd_train(const Options& o) {
    const auto spec = resolve(o);
    const stream::TaskConfig& task = spec.single_task();
    const NamedModel& m = find_model(spec.single_model());
    if (spec.learning_rates.empty()) {
        throw ConfigError("train: no learning rate (set 'learning_rate' or pass --lr)");
    }
    const double lr = spec.single_learning_rate();
    const std::uint64_t seed = spec.seeds.empty() ? 0 : spec.single_seed();
    const TrainConfig cfg = make_train_config(task, lr, seed, spec.train);

    const auto data = stream::generate(task);
    EpochCallback log;
    if (o.verbose) {
        log = [](const EpochReport& e) {
            fmt::print(stderr, "epoch {:4d} loss {:.6g} val {:.6g}{}\n", e.epoch, e.train_loss, e.val_error,
                       e.improved ? " *" : "");
        };
    }
    std::unique_ptr<SequenceModel> model;
    const RunRecord r = run_named(m, task, data, cfg, log, &model);
    const std::string line = format_record(r);
    fmt::print("{}\n", line);

    std::filesystem::path checkpoint = o.checkpoint;
    if (!o.out.empty()) {
        ResultsStore store(std::filesystem::path(o.out) / "results.txt", true);
        store.append(r);
        if (checkpoint.empty()) {
            checkpoint = std::filesystem::path(o.out) / "checkpoints" /
                         fmt::format("{}-{}-lr{:g}-seed{}.ckpt", r.task, r.config_id, lr, seed);
        }
    }
    if (!checkpoint.empty() && r.ok()) {
        save_checkpoint(checkpoint, *model,
                        {{"task", task}, {"train", cfg}, {"record", line}, {"config_id", r.config_id}});
        fmt::print(stderr, "checkpoint written to {}\n", checkpoint.string());
    }
    if (!r.ok()) {
        fmt::print(stderr, "run failed: {}\n", r.message);
        return exit_runtime;
    }
    return 0;
}

int cmd_eval(const Options& o) {
    if (o.checkpoint.empty()) {
        throw ConfigError("eval: --checkpoint is required");
    }
    auto loaded = load_checkpoint(o.checkpoint);
    stream::TaskConfig task;
    if (!o.config.empty() || !o.task.empty()) {
        task = resolve(o).single_task();
    } else if (loaded.metadata.contains("task")) {
        task = loaded.metadata.at("task").get<stream::TaskConfig>();
    } else {
        throw ConfigError("eval: checkpoint has no task; pass --config or --task");
    }
    const auto d = stream::dims(task);
    if (d.input_dim != loaded.model->input_dim() || d.output_dim != loaded.model->output_dim()) {
        throw ConfigError(fmt::format("eval: model dims {}->{} do not fit task dims {}->{}",
                                      loaded.model->input_dim(), loaded.model->output_dim(), d.input_dim,
                                      d.output_dim));
    }
    const auto data = stream::generate(task);
    const std::vector<stream::TaskSample>* split = nullptr;
    if (o.split == "train") {
        split = &data.train;
    } else if (o.split == "valid") {
        split = &data.valid;
    } else if (o.split == "test") {
        split = &data.test;
    } else {
        throw ConfigError(fmt::format("eval: --split must be train, valid or test, got '{}'", o.split));
    }
    const double error = evaluate(*loaded.model, *split);
    fmt::print("task={} split={} samples={} error={:.17g}\n", stream::task_name(task.task), o.split, split->size(),
               error);
    return 0;
}

int cmd_sweep(const Options& o) {
    if (o.config.empty()) {
        throw ConfigError("sweep: --config is required");
    }
    const auto spec = resolve(o).sweep_spec();
    const auto store = require_out(o, "sweep") / "results.txt";
    SweepOptions options;
    options.workers = o.workers;
    options.resume = o.resume;
    options.on_record = [](const RunRecord& r, std::size_t done, std::size_t total) {
        fmt::print("[{}/{}] {} {} lr={:g} seed={} {} test_error={:.6g} epochs={} {}ms\n", done, total, r.task,
                   r.config_id, r.learning_rate, r.seed, r.status, r.test_error, r.epochs, r.wall_ms);
        std::fflush(stdout);
    };
    const auto result = sweep(spec, store, options);
    fmt::print("sweep: {} cells, {} already done, {} run, {} failed -> {}\n", result.total, result.skipped,
               result.executed, result.failed, store.string());
    return 0;
}

int cmd_report(const Options& o) {
    std::filesystem::path file = o.results;
    if (file.empty()) {
        file = require_out(o, "report") / "results.txt";
    }
    if (!std::filesystem::exists(file)) {
        throw DataError(fmt::format("results store {} does not exist", file.string()));
    }
    const auto loaded = load_records(file);
    const auto bwa = aggregate_bwa(loaded.records);
    const auto boa = aggregate_boa(loaded.records);
    const std::string text = render_table(bwa, "Best when averaged over seeds (BWA): error / size") + "\n" +
                             render_table(boa, "Best over all runs (BOA): error / size");
    fmt::print("{}", text);
    if (!o.out.empty()) {
        write_text(std::filesystem::path(o.out) / "report.txt", text);
        write_text(std::filesystem::path(o.out) / "report.csv", render_csv(bwa, boa));
    }
    return 0;
}

int cmd_params(const Options& o) {
    const auto rows = param_counts(o.input_dim, o.output_dim);
    const std::string text = render_param_report(rows, o.input_dim, o.output_dim);
    fmt::print("{}", text);
    if (!o.out.empty()) {
        write_text(std::filesystem::path(o.out) / "params.txt", text);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Echo State Transformer lab: data generation, training, sweeps and reports"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Experiment file (JSON)");
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--seed", o.seed, "Seed override");
        sub->add_option("--task", o.task, "Task name, with benchmark defaults");
    };
    auto* gen = app.add_subcommand("generate", "Generate a task's splits and export them");
    common(gen);
    auto* train_cmd = app.add_subcommand("train", "Train one model on one task");
    common(train_cmd);
    train_cmd->add_option("--model", o.model, "Model configuration name (e.g. est-1-1k)");
    train_cmd->add_option("--lr", o.learning_rate, "Learning rate");
    train_cmd->add_option("--checkpoint", o.checkpoint, "Where to write the best checkpoint");
    train_cmd->add_flag("-v,--verbose", o.verbose, "Log every epoch to stderr");
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    eval_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--config", o.config, "Experiment file overriding the stored task");
    eval_cmd->add_option("--task", o.task, "Task name overriding the stored task");
    eval_cmd->add_option("--split", o.split, "train, valid or test");
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a grid of training runs");
    sweep_cmd->add_option("--config", o.config, "Experiment file (JSON)")->required();
    sweep_cmd->add_option("--out", o.out, "Output directory")->required();
    sweep_cmd->add_option("--seed", o.seed, "Replace the seed grid with one seed");
    sweep_cmd->add_option("--workers", o.workers, "Concurrent runs")->check(CLI::PositiveNumber);
    sweep_cmd->add_flag("--resume", o.resume, "Continue an existing results store");
    auto* report_cmd = app.add_subcommand("report", "Summarise a results store as BWA and BOA tables");
    report_cmd->add_option("results", o.results, "Results store (default: <out>/results.txt)");
    report_cmd->add_option("--out", o.out, "Directory for report.txt and report.csv");
    auto* params_cmd = app.add_subcommand("params", "Parameter counts of every model configuration");
    params_cmd->add_option("--input-dim", o.input_dim, "Input dimension")->check(CLI::PositiveNumber);
    params_cmd->add_option("--output-dim", o.output_dim, "Output dimension")->check(CLI::PositiveNumber);
    params_cmd->add_option("--out", o.out, "Directory for params.txt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (*gen) return cmd_generate(o);
        if (*train_cmd) return cmd_train(o);
        if (*eval_cmd) return cmd_eval(o);
        if (*sweep_cmd) return cmd_sweep(o);
        if (*report_cmd) return cmd_report(o);
        if (*params_cmd) return cmd_params(o);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return exit_config;
    } catch (const nlohmann::json::exception& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return exit_config;
    } catch (const DataError& e) {
        fmt::print(stderr, "data error: {}\n", e.what());
        return exit_data;
    } catch (const std::filesystem::filesystem_error& e) {
        fmt::print(stderr, "data error: {}\n", e.what());
        return exit_data;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return exit_runtime;
    }
    return exit_runtime;
}
