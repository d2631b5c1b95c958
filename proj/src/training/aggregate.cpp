#include "est/training/aggregate.hpp"

#include "est/training/model_zoo.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>
#include <unordered_set>

namespace est {

namespace {

using GroupKey = std::tuple<std::string, std::string, std::string>;

std::size_t size_rank(const std::string& size) {
    try {
        return nominal_parameters(size);
    } catch (const std::exception&) {
        return std::numeric_limits<std::size_t>::max();
    }
}

std::map<GroupKey, std::vector<const RunRecord*>> group(std::span<const RunRecord> records) {
    std::map<GroupKey, std::vector<const RunRecord*>> groups;
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
        if (!r.ok() || !seen.insert(r.key()).second) {
            continue;
        }
        groups[{r.task, r.family, r.size}].push_back(&r);
    }
    return groups;
}

void sort_rows(std::vector<AggregateRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const AggregateRow& a, const AggregateRow& b) {
        return std::forward_as_tuple(a.task, a.family, size_rank(a.size), a.size) <
               std::forward_as_tuple(b.task, b.family, size_rank(b.size), b.size);
    });
}

} // namespace

std::vector<AggregateRow> aggregate_bwa(std::span<const RunRecord> records) {
    std::vector<AggregateRow> rows;
    for (const auto& [key, group_records] : group(records)) {
        std::set<std::uint64_t> seeds;
        std::map<std::pair<std::string, double>, std::vector<const RunRecord*>> cells;
        for (const RunRecord* r : group_records) {
            seeds.insert(r->seed);
            cells[{r->config_id, r->learning_rate}].push_back(r);
        }
        bool found = false;
        AggregateRow best;
        for (const auto& [cell, runs] : cells) {
            if (runs.size() != seeds.size()) {
                continue;
            }
            double sum = 0.0;
            for (const RunRecord* r : runs) {
                sum += r->test_error;
            }
            const double mean = sum / static_cast<double>(runs.size());
            // Cells iterate in (config, lr) order, so strict improvement keeps the documented tie-break.
            if (!found || mean < best.error) {
                best = {std::get<0>(key), std::get<1>(key), std::get<2>(key), cell.first, cell.second, mean,
                        runs.size()};
                found = true;
            }
        }
        if (found) {
            rows.push_back(best);
        }
    }
    sort_rows(rows);
    return rows;
}

std::vector<AggregateRow> aggregate_boa(std::span<const RunRecord> records) {
    std::vector<AggregateRow> rows;
    for (const auto& [key, group_records] : group(records)) {
        const RunRecord* best = nullptr;
        for (const RunRecord* r : group_records) {
            if (!best || std::tie(r->test_error, r->config_id, r->learning_rate, r->seed) <
                             std::tie(best->test_error, best->config_id, best->learning_rate, best->seed)) {
                best = r;
            }
        }
        rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), best->config_id, best->learning_rate,
                        best->test_error, 1});
    }
    sort_rows(rows);
    return rows;
}

} // namespace est
