#pragma once

// Human and CSV renderings of sweep summaries and of the model zoo's parameter
// counts.

#include "est/training/aggregate.hpp"

#include <string>
#include <vector>

namespace est {

/// "0.232 / 1k": error to three decimals, then the size bucket.
[[nodiscard]] std::string format_cell(double error, std::string_view size);

/// One row per task, one column per family; each cell shows the best size of
/// that family for the task, "-" when the family has no result.
[[nodiscard]] std::string render_table(std::span<const AggregateRow> rows, std::string_view title);

/// Header "metric,task,family,size,config,learning_rate,error,runs" and one
/// line per row of each summary.
[[nodiscard]] std::string render_csv(std::span<const AggregateRow> bwa, std::span<const AggregateRow> boa);

struct ParamCountRow {
    std::string name;
    std::string size;
    std::size_t count = 0;
    std::size_t nominal = 0;
    double ratio = 0.0;
    bool within = false; // ratio in [0.5, 2]
    std::string largest_block; // parameter group holding the most scalars
    double largest_share = 0.0;
};

[[nodiscard]] std::vector<ParamCountRow> param_counts(std::size_t input_dim, std::size_t output_dim);
/// Table of every zoo configuration with a note for each one outside its bucket.
[[nodiscard]] std::string render_param_report(std::span<const ParamCountRow> rows, std::size_t input_dim,
                                              std::size_t output_dim);

} // namespace est
