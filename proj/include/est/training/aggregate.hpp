#pragma once

// Summaries of a sweep per (task, family, size) group.
//   BWA: the (config, learning rate) cell with the lowest mean test error over
//        seeds, counting only cells that have every seed seen in the group.
//   BOA: the lowest single test error in the group.
// Failed runs are ignored, so a cell with a failed seed is incomplete. When
// a key appears more than once the first record wins.

#include "est/training/trainer.hpp"

#include <span>
#include <string>
#include <vector>

namespace est {

struct AggregateRow {
    std::string task;
    std::string family;
    std::string size;
    std::string config_id; // winning configuration
    double learning_rate = 0.0;
    double error = 0.0;
    std::size_t runs = 0; // records behind `error`
};

/// Rows sorted by task, family, then nominal size. Ties go to the smaller
/// config id, then the smaller learning rate (then the smaller seed for BOA).
[[nodiscard]] std::vector<AggregateRow> aggregate_bwa(std::span<const RunRecord> records);
[[nodiscard]] std::vector<AggregateRow> aggregate_boa(std::span<const RunRecord> records);

} // namespace est
