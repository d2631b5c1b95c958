#include "est/stream/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

namespace est::stream {

namespace {

constexpr char magic[8] = {'E', 'S', 'T', 'D', 'A', 'T', 'A', '1'};


void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
public:
    Reader(std::ifstream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

    std::uint64_t u64() {
        unsigned char b[8];
        if (!in_.read(reinterpret_cast<char*>(b), 8)) {
            throw DataError(fmt::format("dataset file {} is truncated", path_.string()));
        }
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= std::uint64_t{b[i]} << (8 * i);
        }
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(std::size_t n) {
        std::string s(n, '\0');
        if (!in_.read(s.data(), static_cast<std::streamsize>(n))) {
            throw DataError(fmt::format("dataset file {} is truncated", path_.string()));
        }
        return s;
    }

private:
    std::ifstream& in_;
    const std::filesystem::path& path_;
};

} // namespace

std::string config_hash(const TaskConfig& cfg) {
    const std::string text = nlohmann::json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : text) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

void write_split(const std::filesystem::path& file, const TaskConfig& cfg, std::span<const TaskSample> samples) {
    if (samples.empty()) {
        throw UsageError("write_split: no samples");
    }
    const auto& first = samples.front();
    nlohmann::json header{{"task", task_name(cfg.task)},
                          {"config_hash", config_hash(cfg)},
                          {"seed", cfg.seed},
                          {"T", first.length()},
                          {"input_dim", first.inputs.cols()},
                          {"output_dim", first.targets.cols()},
                          {"kind", first.kind == TaskKind::discrete ? "discrete" : "continuous"},
                          {"count", samples.size()}};
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError(fmt::format("cannot write dataset file {}", file.string()));
    }
    const std::string h = header.dump();
    out.write(magic, sizeof magic);
    put_u64(out, h.size());
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const auto& s : samples) {
        if (s.inputs.shape() != first.inputs.shape() || s.targets.shape() != first.targets.shape()) {
            throw DimensionError("write_split: samples of one split must share their shapes");
        }
        for (double v : s.inputs.data()) {
            put_f64(out, v);
        }
        for (double v : s.targets.data()) {
            put_f64(out, v);
        }
        for (auto m : s.eval_mask) {
            put_f64(out, m != 0 ? 1.0 : 0.0);
        }
    }
    if (!out) {
        throw DataError(fmt::format("failed while writing {}", file.string()));
    }
}

std::vector<TaskSample> read_split(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open dataset file {}", file.string()));
    }
    Reader r(in, file);
    if (r.bytes(sizeof magic) != std::string(magic, sizeof magic)) {
        throw DataError(fmt::format("{} is not a dataset export (bad magic)", file.string()));
    }
    const std::uint64_t header_len = r.u64();
    if (header_len > (1u << 20)) {
        throw DataError(fmt::format("{} declares an implausible header length {}", file.string(), header_len));
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.bytes(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("{} has an unreadable header: {}", file.string(), e.what()));
    }
    std::size_t t = 0, in_dim = 0, out_dim = 0, count = 0;
    TaskKind kind = TaskKind::discrete;
    try {
        t = header.at("T").get<std::size_t>();
        in_dim = header.at("input_dim").get<std::size_t>();
        out_dim = header.at("output_dim").get<std::size_t>();
        count = header.at("count").get<std::size_t>();
        kind = header.at("kind").get<std::string>() == "discrete" ? TaskKind::discrete : TaskKind::continuous;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("{} header is incomplete: {}", file.string(), e.what()));
    }
    std::vector<TaskSample> samples;
    samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> x(t * in_dim), y(t * out_dim);
        std::vector<std::uint8_t> mask(t);
        for (auto& v : x) {
            v = r.f64();
        }
        for (auto& v : y) {
            v = r.f64();
        }
        for (auto& m : mask) {
            m = r.f64() != 0.0 ? 1 : 0;
        }
        samples.push_back({Tensor::from(t, in_dim, std::move(x)), Tensor::from(t, out_dim, std::move(y)),
                           std::move(mask), kind});
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError(fmt::format("{} has trailing bytes after {} samples", file.string(), count));
    }
    return samples;
}

void export_dataset(const std::filesystem::path& dir, const TaskConfig& cfg, const Dataset& data) {
    std::filesystem::create_directories(dir);
    write_split(dir / "train.estd", cfg, data.train);
    write_split(dir / "valid.estd", cfg, data.valid);
    write_split(dir / "test.estd", cfg, data.test);
    std::ofstream echo(dir / "config.json", std::ios::trunc);
    echo << nlohmann::json(cfg).dump(2) << '\n';
    if (!echo) {
        throw DataError(fmt::format("cannot write config echo in {}", dir.string()));
    }
}

Dataset import_dataset(const std::filesystem::path& dir) {
    return {read_split(dir / "train.estd"), read_split(dir / "valid.estd"), read_split(dir / "test.estd")};
}

} // namespace est::stream
