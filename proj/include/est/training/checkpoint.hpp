#pragma once

// Model checkpoint container:
//   "ESTCKPT1" | u64 header length | JSON header | tensor payloads
// The header holds the format tag and version, the model config (enough to
// rebuild it), the seed, free-form metadata, and the name, role and shape of
// each tensor. Payloads follow in header order as little-endian float64.
// Fixed reservoir matrices are stored with role "buffer".

#include "est/sequence_model.hpp"

#include <filesystem>
#include <memory>

namespace est {

inline constexpr int checkpoint_version = 1;

void save_checkpoint(const std::filesystem::path& file, const SequenceModel& model,
                     const nlohmann::json& metadata = nlohmann::json::object());

struct LoadedCheckpoint {
    std::unique_ptr<SequenceModel> model;
    nlohmann::json metadata;
};

/// Rebuilds the model from its stored config and overwrites every tensor.
/// Throws DataError on a bad magic, unsupported version, or mismatched tensor.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& file);

} // namespace est
