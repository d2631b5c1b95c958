#pragma once

// Dense float64 matrices with define-by-run reverse-mode differentiation.
//
// Every tensor is rank 2 (scalars are 1x1). A Tensor is a shared handle: copies
// refer to the same storage, which is what lets a parameter be recorded on a
// tape and later updated in place by an optimizer. Use clone() for a deep copy.
//
// Operations are recorded on the Tape installed by the innermost TapeScope of
// the calling thread. Without a scope nothing is recorded and results never
// require gradients, which is the inference path.

#include "est/errors.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace est {

struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    [[nodiscard]] std::size_t size() const noexcept { return rows * cols; }
    bool operator==(const Shape&) const = default;
};

std::string to_string(Shape s);

namespace detail {
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // sized iff requires_grad
    bool requires_grad = false;
};
} // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor full(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
    static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    [[nodiscard]] bool defined() const noexcept { return node_ != nullptr; }
    [[nodiscard]] Shape shape() const { return node().shape; }
    [[nodiscard]] std::size_t rows() const { return node().shape.rows; }
    [[nodiscard]] std::size_t cols() const { return node().shape.cols; }
    [[nodiscard]] std::size_t size() const { return node().value.size(); }

    [[nodiscard]] std::span<const double> data() const { return node().value; }
    /// Direct write access, bypassing the tape. Meant for initialisation and optimizers.
    [[nodiscard]] std::span<double> mutable_data() { return node().value; }

    [[nodiscard]] double at(std::size_t r, std::size_t c) const;
    /// Value of a 1x1 tensor.
    [[nodiscard]] double item() const;

    [[nodiscard]] bool requires_grad() const { return node().requires_grad; }
    /// Turns a leaf into a trainable leaf (allocates a zeroed gradient buffer).
    void set_requires_grad(bool on);
    [[nodiscard]] std::span<const double> grad() const { return node().grad; }
    [[nodiscard]] std::span<double> mutable_grad() { return node().grad; }
    void zero_grad();

    /// Deep copy of the values; the copy is a fresh leaf.
    [[nodiscard]] Tensor clone(bool requires_grad = false) const;

    [[nodiscard]] bool same_storage(const Tensor& other) const noexcept { return node_ == other.node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    detail::Node& node() const;

    std::shared_ptr<detail::Node> node_;

    friend class Tape;
    friend Tensor make_result(Shape, std::vector<double>);
};

/// Creates an unrecorded tensor from computed values (the first half of every op).
Tensor make_result(Shape shape, std::vector<double> values);

class Tape;

/// Backward rule: reads the output gradient and accumulates into the inputs that
/// require gradients. Inputs are passed in the order they were recorded.
using BackwardFn = std::function<void(const Tensor& output, std::span<Tensor> inputs)>;

class Tape {
public:
    struct Entry {
        std::vector<Tensor> inputs;
        Tensor output;
        BackwardFn backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }
    void clear() { entries_.clear(); }

    /// Reverse sweep from `loss`. Intermediate gradients are reset first, leaf
    /// gradients accumulate.
    void backward(const Tensor& loss);

private:
    friend Tensor record(Tensor, std::vector<Tensor>, BackwardFn);
    std::vector<Entry> entries_;
};

/// Installs a tape as the recording target for the current thread.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

/// Suspends recording for the current thread.
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* previous_;
};

[[nodiscard]] Tape* active_tape() noexcept;

/// Registers `output` as the result of an op over `inputs`. If a tape is active
/// and any input requires a gradient, the output becomes differentiable and the
/// rule is appended to the tape; otherwise the output is returned unchanged.
Tensor record(Tensor output, std::vector<Tensor> inputs, BackwardFn backward);

/// backward(loss, tape): loss must be a 1x1 tensor.
void backward(const Tensor& loss, Tape& tape);

/// NaN/Inf detection on every op result. Defaults to on in builds without NDEBUG.
void set_finite_checks(bool enabled) noexcept;
[[nodiscard]] bool finite_checks_enabled() noexcept;

} // namespace est
