#include "est/training/trainer.hpp"

#include "est/ops.hpp"
#include "est/training/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace est {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError(fmt::format("train config: learning_rate must be positive, got {}", learning_rate));
    }
    if (weight_decay < 0.0) {
        throw ConfigError("train config: weight_decay must be non-negative");
    }
    if (batch_size == 0) {
        throw ConfigError("train config: batch_size must be positive");
    }
    if (epochs == 0) {
        throw ConfigError("train config: epochs must be positive");
    }
    if (patience < 1 || patience > epochs) {
        throw ConfigError(fmt::format("train config: patience must lie in [1, epochs={}], got {}", epochs, patience));
    }
    if (!(clip_norm > 0.0)) {
        throw ConfigError("train config: clip_norm must be positive");
    }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay}, {"batch_size", c.batch_size},
         {"epochs", c.epochs},               {"patience", c.patience},         {"seed", c.seed},
         {"clip_norm", c.clip_norm}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (!j.is_object()) {
        throw ConfigError("train config must be an object");
    }
    c = TrainConfig{};
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "weight_decay") c.weight_decay = value.get<double>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else if (key == "epochs") c.epochs = value.get<std::size_t>();
            else if (key == "patience") c.patience = value.get<std::size_t>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "clip_norm") c.clip_norm = value.get<double>();
            else throw ConfigError(fmt::format("train config: unknown key '{}'", key));
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(fmt::format("train config: field '{}' has the wrong type ({})", key, value.dump()));
        }
    }
}

std::string RunRecord::key() const { return fmt::format("{}|{}|{:.17g}|{}", task, config_id, learning_rate, seed); }

std::vector<Tensor> predict(SequenceModel& model, std::span<const stream::TaskSample> samples) {
    NoGradScope no_grad;
    std::vector<Tensor> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        out.push_back(model.forward_sequence(s.inputs));
    }
    return out;
}

double evaluate(SequenceModel& model, std::span<const stream::TaskSample> samples) {
    const auto predictions = predict(model, samples);
    return stream::score(samples, predictions);
}

Tensor sequence_loss(SequenceModel& model, const stream::TaskSample& sample, double denominator) {
    const Tensor out = model.forward_sequence(sample.inputs);
    if (sample.kind == stream::TaskKind::discrete) {
        return masked_cross_entropy(out, sample.targets, sample.eval_mask, denominator);
    }
    return masked_mse(out, sample.targets, sample.eval_mask, denominator);
}

std::vector<std::vector<double>> snapshot_parameters(const SequenceModel& model) {
    std::vector<std::vector<double>> out;
    for (const auto& p : model.named_parameters()) {
        out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    }
    return out;
}

void restore_parameters(SequenceModel& model, const std::vector<std::vector<double>>& values) {
    auto params = model.named_parameters();
    if (params.size() != values.size()) {
        throw DimensionError("restore_parameters: parameter count changed");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto dst = params[i].tensor.mutable_data();
        if (dst.size() != values[i].size()) {
            throw DimensionError(fmt::format("restore_parameters: size mismatch for {}", params[i].name));
        }
        std::copy(values[i].begin(), values[i].end(), dst.begin());
    }
}

RunRecord train(SequenceModel& model, const stream::Dataset& data, const TrainConfig& cfg,
                const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.train.empty() || data.valid.empty() || data.test.empty()) {
        throw DataError("train: every split needs at least one sample");
    }
    const auto start = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.family = model.family();
    rec.learning_rate = cfg.learning_rate;
    rec.seed = cfg.seed;

    std::vector<Tensor> params = model.parameters();
    AdamW opt(params, {.learning_rate = cfg.learning_rate, .weight_decay = cfg.weight_decay});
    Rng shuffle_rng = make_rng(cfg.seed, "train.shuffle");
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double best = std::numeric_limits<double>::infinity();
    auto best_params = snapshot_parameters(model);
    std::size_t since_best = 0;
    auto fail = [&](std::string message) {
        rec.status = "failed";
        rec.message = std::move(message);
        rec.val_error = std::numeric_limits<double>::quiet_NaN();
        rec.test_error = std::numeric_limits<double>::quiet_NaN();
        rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
                          .count();
        return rec;
    };

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), b + cfg.batch_size);
            double denominator = 0.0;
            for (std::size_t i = b; i < end; ++i) {
                denominator += static_cast<double>(data.train[order[i]].evaluated());
            }
            opt.zero_grad();
            double batch_loss = 0.0;
            for (std::size_t i = b; i < end; ++i) {
                Tape tape;
                Tensor loss;
                {
                    TapeScope scope(tape);
                    loss = sequence_loss(model, data.train[order[i]], denominator);
                }
                if (!std::isfinite(loss.item())) {
                    return fail(fmt::format("non-finite loss at epoch {}", epoch));
                }
                tape.backward(loss);
                batch_loss += loss.item();
            }
            const double norm = clip_grad_norm(params, cfg.clip_norm);
            if (!std::isfinite(norm)) {
                return fail(fmt::format("non-finite gradient norm at epoch {}", epoch));
            }
            opt.step();
            epoch_loss += batch_loss;
        }
        const double val = evaluate(model, data.valid);
        if (!std::isfinite(val)) {
            return fail(fmt::format("non-finite validation error at epoch {}", epoch));
        }
        const bool improved = val < best;
        if (improved) {
            best = val;
            best_params = snapshot_parameters(model);
            since_best = 0;
        } else {
            ++since_best;
        }
        rec.epochs = epoch;
        if (on_epoch) {
            const auto batches = static_cast<double>((order.size() + cfg.batch_size - 1) / cfg.batch_size);
            on_epoch({epoch, epoch_loss / batches, val, improved});
        }
        if (since_best >= cfg.patience) {
            break;
        }
    }
    restore_parameters(model, best_params);
    rec.val_error = best;
    rec.test_error = evaluate(model, data.test);
    rec.wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

} // namespace est
