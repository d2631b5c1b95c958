#pragma once

// IDX reader and the sequential (column-by-column) MNIST task. The image file
// carries magic 0x00000803 and three big-endian dimensions, the label file
// magic 0x00000801 and one.

#include "est/stream/tasks.hpp"

#include <filesystem>

namespace est::stream {

struct IdxImages {
    std::size_t count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels; // count * rows * cols, row-major per image

    [[nodiscard]] std::uint8_t at(std::size_t image, std::size_t r, std::size_t c) const {
        return pixels[(image * rows + r) * cols + c];
    }
};

struct MnistData {
    IdxImages images;
    std::vector<std::uint8_t> labels;
};

inline constexpr std::uint32_t idx_images_magic = 0x00000803;
inline constexpr std::uint32_t idx_labels_magic = 0x00000801;
inline constexpr const char* mnist_images_file = "train-images-idx3-ubyte";
inline constexpr const char* mnist_labels_file = "train-labels-idx1-ubyte";

/// Throw DataError naming the path and, for a bad header, the magic found.
IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);

/// cfg.data_dir, else $EST_LAB_DATA_DIR, else DataError.
std::filesystem::path mnist_directory(const TaskConfig& cfg);
MnistData load_mnist(const std::filesystem::path& dir);

/// 28 column steps scaled to [0, 1] followed by one trigger step; the target
/// at the trigger step is the digit.
TaskSample mnist_sample(const MnistData& data, std::size_t index);

/// n_train + n_valid + n_test distinct images drawn with cfg.seed.
Dataset gen_sequential_mnist(const TaskConfig& cfg, const MnistData& data);

} // namespace est::stream
