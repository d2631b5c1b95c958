#include "est/training/checkpoint.hpp"

#include "est/training/model_zoo.hpp"

#include <bit>
#include <fstream>

#include <fmt/format.h>

namespace est {

namespace {

constexpr char magic[8] = {'E', 'S', 'T', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<char>(v >> (8 * i));
    }
    out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in, const std::filesystem::path& file) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) {
        throw DataError(fmt::format("checkpoint {} is truncated", file.string()));
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= std::uint64_t{b[i]} << (8 * i);
    }
    return v;
}

std::vector<std::pair<NamedTensor, std::string>> all_tensors(const SequenceModel& model) {
    std::vector<std::pair<NamedTensor, std::string>> out;
    for (auto& p : model.named_parameters()) {
        out.emplace_back(p, "parameter");
    }
    for (auto& b : model.named_buffers()) {
        out.emplace_back(b, "buffer");
    }
    return out;
}

} // namespace

void save_checkpoint(const std::filesystem::path& file, const SequenceModel& model, const nlohmann::json& metadata) {
    const nlohmann::json config = model.config_json();
    nlohmann::json header{{"format", "est-lab-checkpoint"},
                          {"version", checkpoint_version},
                          {"config", config},
                          {"seed", config.value("seed", std::uint64_t{0})},
                          {"metadata", metadata},
                          {"tensors", nlohmann::json::array()}};
    const auto tensors = all_tensors(model);
    for (const auto& [t, role] : tensors) {
        header["tensors"].push_back({{"name", t.name}, {"role", role}, {"rows", t.tensor.rows()},
                                     {"cols", t.tensor.cols()}});
    }
    if (file.has_parent_path()) {
        std::filesystem::create_directories(file.parent_path());
    }
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError(fmt::format("cannot write checkpoint {}", file.string()));
    }
    const std::string h = header.dump();
    out.write(magic, sizeof magic);
    put_u64(out, h.size());
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const auto& [t, role] : tensors) {
        for (double v : t.tensor.data()) {
            put_u64(out, std::bit_cast<std::uint64_t>(v));
        }
    }
    if (!out) {
        throw DataError(fmt::format("failed while writing checkpoint {}", file.string()));
    }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open checkpoint {}", file.string()));
    }
    char m[8] = {};
    if (!in.read(m, 8) || !std::equal(m, m + 8, magic)) {
        throw DataError(fmt::format("{} is not a checkpoint (bad magic)", file.string()));
    }
    const std::uint64_t len = get_u64(in, file);
    if (len > (64u << 20)) {
        throw DataError(fmt::format("checkpoint {} declares an implausible header length", file.string()));
    }
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
        throw DataError(fmt::format("checkpoint {} is truncated", file.string()));
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("checkpoint {} has an unreadable header: {}", file.string(), e.what()));
    }
    if (header.value("format", "") != "est-lab-checkpoint" || header.value("version", 0) != checkpoint_version) {
        throw DataError(fmt::format("checkpoint {} has an unsupported format or version", file.string()));
    }
    LoadedCheckpoint loaded{make_model(header.at("config")), header.value("metadata", nlohmann::json::object())};
    auto tensors = all_tensors(*loaded.model);
    const auto& listed = header.at("tensors");
    if (listed.size() != tensors.size()) {
        throw DataError(fmt::format("checkpoint {} lists {} tensors, model has {}", file.string(), listed.size(),
                                    tensors.size()));
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        auto& [t, role] = tensors[i];
        const auto& entry = listed[i];
        if (entry.at("name") != t.name || entry.at("rows") != t.tensor.rows() || entry.at("cols") != t.tensor.cols()) {
            throw DataError(fmt::format("checkpoint {}: tensor {} does not match model tensor {} {}", file.string(),
                                        entry.dump(), t.name, to_string(t.tensor.shape())));
        }
        for (auto& v : t.tensor.mutable_data()) {
            v = std::bit_cast<double>(get_u64(in, file));
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError(fmt::format("checkpoint {} has trailing bytes", file.string()));
    }
    return loaded;
}

} // namespace est
