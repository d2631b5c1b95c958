#include "est/training/report.hpp"

#include "est/stream/tasks.hpp"
#include "est/training/model_zoo.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

namespace est {

std::string format_cell(double error, std::string_view size) { return fmt::format("{:.3f} / {}", error, size); }

std::string render_table(std::span<const AggregateRow> rows, std::string_view title) {
    std::vector<std::string> families;
    for (std::string_view f : {"est", "gru", "lstm", "transformer"}) {
        families.emplace_back(f);
    }
    std::vector<std::string> tasks;
    for (auto id : stream::all_tasks) {
        tasks.emplace_back(stream::task_name(id));
    }
    for (const auto& r : rows) {
        if (std::find(families.begin(), families.end(), r.family) == families.end()) {
            families.push_back(r.family);
        }
        if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) {
            tasks.push_back(r.task);
        }
    }
    std::map<std::pair<std::string, std::string>, const AggregateRow*> best;
    for (const auto& r : rows) {
        auto& slot = best[{r.task, r.family}];
        if (!slot || r.error < slot->error) {
            slot = &r;
        }
    }
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header{"task"};
    header.insert(header.end(), families.begin(), families.end());
    cells.push_back(header);
    for (const auto& t : tasks) {
        std::vector<std::string> line{t};
        bool any = false;
        for (const auto& f : families) {
            const auto it = best.find({t, f});
            if (it == best.end()) {
                line.emplace_back("-");
            } else {
                line.push_back(format_cell(it->second->error, it->second->size));
                any = true;
            }
        }
        if (any) {
            cells.push_back(std::move(line));
        }
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& line : cells) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            width[c] = std::max(width[c], line[c].size());
        }
    }
    std::string out = fmt::format("{}\n", title);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t c = 0; c < cells[i].size(); ++c) {
            out += c == 0 ? fmt::format("{:<{}}", cells[i][c], width[c]) : fmt::format("  {:>{}}", cells[i][c], width[c]);
        }
        out += '\n';
        if (i == 0) {
            std::size_t total = 0;
            for (std::size_t w : width) {
                total += w + 2;
            }
            out += std::string(total - 2, '-') + '\n';
        }
    }
    return out;
}

std::string render_csv(std::span<const AggregateRow> bwa, std::span<const AggregateRow> boa) {
    std::string out = "metric,task,family,size,config,learning_rate,error,runs\n";
    auto emit = [&](std::string_view metric, std::span<const AggregateRow> rows) {
        for (const auto& r : rows) {
            out += fmt::format("{},{},{},{},{},{:.17g},{:.17g},{}\n", metric, r.task, r.family, r.size, r.config_id,
                               r.learning_rate, r.error, r.runs);
        }
    };
    emit("bwa", bwa);
    emit("boa", boa);
    return out;
}

namespace {

// "layers.0.memory.3.w_in" -> "memory", "embed.w" -> "embed".
std::string block_of(std::string_view name) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (pos <= name.size()) {
        const std::size_t dot = std::min(name.find('.', pos), name.size());
        parts.push_back(name.substr(pos, dot - pos));
        pos = dot + 1;
    }
    if (parts.size() > 2 && parts[0] == "layers") {
        return std::string(parts[2]);
    }
    return std::string(parts[0]);
}

} // namespace

std::vector<ParamCountRow> param_counts(std::size_t input_dim, std::size_t output_dim) {
    std::vector<ParamCountRow> rows;
    for (const auto& m : model_zoo()) {
        ParamCountRow r;
        r.name = m.name;
        r.size = m.size;
        r.count = count_parameters(instantiate(m, input_dim, output_dim, 0));
        r.nominal = nominal_parameters(m.size);
        r.ratio = static_cast<double>(r.count) / static_cast<double>(r.nominal);
        r.within = r.ratio >= 0.5 && r.ratio <= 2.0;
        if (!r.within) {
            std::map<std::string, std::size_t> blocks;
            const ModelConfig config = instantiate(m, input_dim, output_dim, 0);
            if (const auto* e = std::get_if<ESTConfig>(&config)) {
                for (const auto& b : parameter_blocks(*e)) {
                    blocks[b.name] += b.count;
                }
            } else {
                for (const auto& p : make_model(config)->named_parameters()) {
                    blocks[block_of(p.name)] += p.tensor.size();
                }
            }
            const auto top = std::max_element(blocks.begin(), blocks.end(),
                                              [](const auto& a, const auto& b) { return a.second < b.second; });
            r.largest_block = top->first;
            r.largest_share = static_cast<double>(top->second) / static_cast<double>(r.count);
        }
        rows.push_back(r);
    }
    return rows;
}

std::string render_param_report(std::span<const ParamCountRow> rows, std::size_t input_dim, std::size_t output_dim) {
    std::string out = fmt::format("parameter counts at input_dim={} output_dim={}\n", input_dim, output_dim);
    out += fmt::format("{:<18} {:>6} {:>10} {:>8} {:>7}\n", "config", "bucket", "params", "ratio", "bucket");
    for (const auto& r : rows) {
        out += fmt::format("{:<18} {:>6} {:>10} {:>8.3f} {:>7}\n", r.name, r.size, r.count, r.ratio,
                           r.within ? "ok" : "outside");
    }
    std::size_t outside = 0;
    for (const auto& r : rows) {
        if (r.within) {
            continue;
        }
        if (outside++ == 0) {
            out += "\ndeviations from the [0.5x, 2x] bucket range:\n";
        }
        out += fmt::format("  {}: {} parameters is {:.2f}x the nominal {}; the listed layer shapes are kept as "
                           "given, and the largest block is {} with {:.0f}% of the parameters\n",
                           r.name, r.count, r.ratio, r.nominal, r.largest_block, 100.0 * r.largest_share);
    }
    if (outside == 0) {
        out += "\nall configurations fall within [0.5x, 2x] of their bucket\n";
    }
    return out;
}

} // namespace est
