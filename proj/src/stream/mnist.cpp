#include "est/stream/mnist.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numeric>

#include <fmt/format.h>

namespace est::stream {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open IDX file {}", path.string()));
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t big_endian_u32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                             const std::filesystem::path& path) {
    if (bytes.size() < offset + 4) {
        throw DataError(fmt::format("IDX file {} is truncated inside its header ({} bytes)", path.string(),
                                    bytes.size()));
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void check_magic(std::uint32_t found, std::uint32_t expected, const std::filesystem::path& path) {
    if (found != expected) {
        throw DataError(fmt::format("IDX file {} has magic 0x{:08x}, expected 0x{:08x}", path.string(), found,
                                    expected));
    }
}

} // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    check_magic(big_endian_u32(bytes, 0, path), idx_images_magic, path);
    IdxImages img;
    img.count = big_endian_u32(bytes, 4, path);
    img.rows = big_endian_u32(bytes, 8, path);
    img.cols = big_endian_u32(bytes, 12, path);
    const std::size_t payload = img.count * img.rows * img.cols;
    if (bytes.size() != 16 + payload) {
        throw DataError(fmt::format("IDX file {} declares {}x{}x{} pixels ({} bytes) but holds {}", path.string(),
                                    img.count, img.rows, img.cols, payload, bytes.size() - 16));
    }
    img.pixels.assign(bytes.begin() + 16, bytes.end());
    return img;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    check_magic(big_endian_u32(bytes, 0, path), idx_labels_magic, path);
    const std::size_t count = big_endian_u32(bytes, 4, path);
    if (bytes.size() != 8 + count) {
        throw DataError(fmt::format("IDX file {} declares {} labels but holds {}", path.string(), count,
                                    bytes.size() - 8));
    }
    return {bytes.begin() + 8, bytes.end()};
}

std::filesystem::path mnist_directory(const TaskConfig& cfg) {
    if (!cfg.data_dir.empty()) {
        return cfg.data_dir;
    }
    if (const char* env = std::getenv("EST_LAB_DATA_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    throw DataError("sequential_mnist needs the IDX files: set data_dir in the task config or EST_LAB_DATA_DIR");
}

MnistData load_mnist(const std::filesystem::path& dir) {
    MnistData d{read_idx_images(dir / mnist_images_file), read_idx_labels(dir / mnist_labels_file)};
    if (d.images.count != d.labels.size()) {
        throw DataError(fmt::format("MNIST files in {} disagree: {} images, {} labels", dir.string(), d.images.count,
                                    d.labels.size()));
    }
    if (d.images.rows != 28 || d.images.cols != 28) {
        throw DataError(fmt::format("MNIST images in {} are {}x{}, expected 28x28", dir.string(), d.images.rows,
                                    d.images.cols));
    }
    for (auto label : d.labels) {
        if (label > 9) {
            throw DataError(fmt::format("MNIST label {} out of range in {}", int{label}, dir.string()));
        }
    }
    return d;
}

TaskSample mnist_sample(const MnistData& data, std::size_t index) {
    constexpr std::size_t side = 28, steps = side + 1, in = side + 1;
    std::vector<double> inputs(steps * in, 0.0), targets(steps * 10, 0.0);
    for (std::size_t t = 0; t < side; ++t) {
        for (std::size_t r = 0; r < side; ++r) {
            inputs[t * in + r] = static_cast<double>(data.images.at(index, r, t)) / 255.0;
        }
    }
    inputs[side * in + side] = 1.0;
    targets[side * 10 + data.labels[index]] = 1.0;
    std::vector<std::uint8_t> mask(steps, 0);
    mask[side] = 1;
    return {Tensor::from(steps, in, std::move(inputs)), Tensor::from(steps, 10, std::move(targets)), std::move(mask),
            TaskKind::discrete};
}

Dataset gen_sequential_mnist(const TaskConfig& cfg, const MnistData& data) {
    const std::size_t need = cfg.n_train + cfg.n_valid + cfg.n_test;
    if (need > data.images.count) {
        throw DataError(fmt::format("sequential_mnist needs {} images, only {} available", need, data.images.count));
    }
    Rng rng = make_rng(cfg.seed, "stream.mnist");
    std::vector<std::size_t> order(data.images.count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < need; ++i) {
        std::swap(order[i], order[i + uniform_index(rng, order.size() - i)]);
    }
    Dataset out;
    for (std::size_t i = 0; i < need; ++i) {
        auto& split = i < cfg.n_train ? out.train : i < cfg.n_train + cfg.n_valid ? out.valid : out.test;
        split.push_back(mnist_sample(data, order[i]));
    }
    return out;
}

} // namespace est::stream
