#pragma once

// Dataset export. Each split is one binary file:
//   "ESTDATA1" | u64 header length | JSON header | samples
// The header records task, config hash, seed, T, input_dim, output_dim, kind and
// the sample count. Every sample is T input rows, T target rows and T mask
// values, all little-endian float64. A config echo is written next to the splits.

#include "est/stream/tasks.hpp"

#include <filesystem>

namespace est::stream {

/// FNV-1a of the compact JSON form of the config, as 16 hex digits.
[[nodiscard]] std::string config_hash(const TaskConfig& cfg);

void write_split(const std::filesystem::path& file, const TaskConfig& cfg, std::span<const TaskSample> samples);
/// Throws DataError on a bad magic, truncated payload or inconsistent header.
[[nodiscard]] std::vector<TaskSample> read_split(const std::filesystem::path& file);

/// Writes train.estd, valid.estd, test.estd and config.json into `dir`.
void export_dataset(const std::filesystem::path& dir, const TaskConfig& cfg, const Dataset& data);
[[nodiscard]] Dataset import_dataset(const std::filesystem::path& dir);

} // namespace est::stream
