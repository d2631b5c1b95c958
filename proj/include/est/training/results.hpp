#pragma once

// Append-only results store. One record per line as space-separated key=value
// pairs in a fixed order; text values are percent-escaped so they never contain
// spaces, '=' or newlines, and doubles are written with 17 significant digits
// so a record survives a round trip bit-exactly. A final line without its
// newline is a write cut short and is ignored on load.

#include "est/training/trainer.hpp"

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace est {

[[nodiscard]] std::string format_record(const RunRecord& r);
/// Throws DataError for malformed lines (unknown or missing keys, bad numbers).
[[nodiscard]] RunRecord parse_record(std::string_view line);

struct LoadedRecords {
    std::vector<RunRecord> records;
    std::uintmax_t valid_bytes = 0; // length of the prefix made of complete lines
    bool partial_tail = false;
};

/// A missing file loads as empty.
[[nodiscard]] LoadedRecords load_records(const std::filesystem::path& file);

/// Thread-safe appender. Every append is flushed before it returns.
class ResultsStore {
public:
    /// With resume, an interrupted final line is cut off so later appends start
    /// on a fresh line. Without resume, an existing nonempty store is refused.
    ResultsStore(std::filesystem::path file, bool resume);

    void append(const RunRecord& r);
    [[nodiscard]] const std::vector<RunRecord>& existing() const { return existing_; }
    [[nodiscard]] const std::filesystem::path& path() const { return file_; }

private:
    std::filesystem::path file_;
    std::vector<RunRecord> existing_;
    std::mutex mutex_;
};

} // namespace est
