#include "est/training/results.hpp"

#include "est/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace est {

namespace {

constexpr std::string_view field_order[] = {"task",       "family", "size",  "config",  "lr",
                                             "seed",       "val_error", "test_error", "epochs", "wall_ms",
                                             "status",     "message"};

std::string escape(std::string_view s) {
    if (s.empty()) {
        return "%";
    }
    std::string out;
    for (char c : s) {
        const auto u = static_cast<unsigned char>(c);
        if (u <= 0x20 || c == '%' || c == '=' || u >= 0x7f) {
            out += fmt::format("%{:02X}", u);
        } else {
            out += c;
        }
    }
    return out;
}

std::string unescape(std::string_view s) {
    // A lone "%" encodes the empty string.
    if (s == "%") {
        return {};
    }
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '%') {
            out += s[i];
            continue;
        }
        unsigned v = 0;
        if (i + 2 >= s.size() || std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16).ptr != s.data() + i + 3) {
            throw DataError(fmt::format("bad escape in results value '{}'", s));
        }
        out += static_cast<char>(v);
        i += 2;
    }
    return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw DataError(fmt::format("results field {} has invalid value '{}'", key, text));
    }
    return v;
}

double parse_double(std::string_view key, std::string_view text) { return parse_number<double>(key, text); }

} // namespace

std::string format_record(const RunRecord& r) {
    return fmt::format("task={} family={} size={} config={} lr={:.17g} seed={} val_error={:.17g} test_error={:.17g} "
                       "epochs={} wall_ms={} status={} message={}",
                       escape(r.task), escape(r.family), escape(r.size), escape(r.config_id), r.learning_rate, r.seed,
                       r.val_error, r.test_error, r.epochs, r.wall_ms, escape(r.status), escape(r.message));
}

RunRecord parse_record(std::string_view line) {
    RunRecord r;
    std::size_t seen = 0;
    std::size_t pos = 0;
    while (pos < line.size()) {
        std::size_t end = line.find(' ', pos);
        if (end == std::string_view::npos) {
            end = line.size();
        }
        const std::string_view token = line.substr(pos, end - pos);
        pos = end + 1;
        if (token.empty()) {
            continue;
        }
        const std::size_t eq = token.find('=');
        if (eq == std::string_view::npos) {
            throw DataError(fmt::format("results token '{}' is not key=value", token));
        }
        const std::string_view key = token.substr(0, eq);
        const std::string_view value = token.substr(eq + 1);
        std::size_t index = 0;
        while (index < std::size(field_order) && field_order[index] != key) {
            ++index;
        }
        if (index == std::size(field_order)) {
            throw DataError(fmt::format("unknown results key '{}'", key));
        }
        if (seen & (std::size_t{1} << index)) {
            throw DataError(fmt::format("duplicate results key '{}'", key));
        }
        seen |= std::size_t{1} << index;
        switch (index) {
        case 0: r.task = unescape(value); break;
        case 1: r.family = unescape(value); break;
        case 2: r.size = unescape(value); break;
        case 3: r.config_id = unescape(value); break;
        case 4: r.learning_rate = parse_double(key, value); break;
        case 5: r.seed = parse_number<std::uint64_t>(key, value); break;
        case 6: r.val_error = parse_double(key, value); break;
        case 7: r.test_error = parse_double(key, value); break;
        case 8: r.epochs = parse_number<std::size_t>(key, value); break;
        case 9: r.wall_ms = parse_number<std::int64_t>(key, value); break;
        case 10: r.status = unescape(value); break;
        default: r.message = unescape(value); break;
        }
    }
    if (seen != (std::size_t{1} << std::size(field_order)) - 1) {
        for (std::size_t i = 0; i < std::size(field_order); ++i) {
            if (!(seen & (std::size_t{1} << i))) {
                throw DataError(fmt::format("results line lacks key '{}'", field_order[i]));
            }
        }
    }
    return r;
}

LoadedRecords load_records(const std::filesystem::path& file) {
    LoadedRecords out;
    if (!std::filesystem::exists(file)) {
        return out;
    }
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open results store {}", file.string()));
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            out.partial_tail = true;
            break;
        }
        ++line_no;
        const std::string_view line(text.data() + pos, nl - pos);
        if (!line.empty()) {
            try {
                out.records.push_back(parse_record(line));
            } catch (const DataError& e) {
                throw DataError(fmt::format("{}:{}: {}", file.string(), line_no, e.what()));
            }
        }
        pos = nl + 1;
        out.valid_bytes = pos;
    }
    return out;
}

ResultsStore::ResultsStore(std::filesystem::path file, bool resume) : file_(std::move(file)) {
    LoadedRecords loaded = load_records(file_);
    const bool nonempty = std::filesystem::exists(file_) && std::filesystem::file_size(file_) > 0;
    if (!resume && nonempty) {
        throw ConfigError(
            fmt::format("results store {} already exists; resume it or choose another output", file_.string()));
    }
    if (loaded.partial_tail) {
        std::filesystem::resize_file(file_, loaded.valid_bytes);
    }
    existing_ = std::move(loaded.records);
    if (file_.has_parent_path()) {
        std::filesystem::create_directories(file_.parent_path());
    }
}

void ResultsStore::append(const RunRecord& r) {
    const std::string line = format_record(r) + '\n';
    std::lock_guard lock(mutex_);
    std::ofstream out(file_, std::ios::binary | std::ios::app);
    out << line;
    out.flush();
    if (!out) {
        throw DataError(fmt::format("failed to append to results store {}", file_.string()));
    }
}

} // namespace est
