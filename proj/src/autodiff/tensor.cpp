#include "est/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <fmt/format.h>

namespace est {

namespace {

thread_local Tape* current_tape = nullptr;

#ifdef NDEBUG
std::atomic<bool> finite_checks{false};
#else
std::atomic<bool> finite_checks{true};
#endif

void check_finite(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError("non-finite value produced by tensor op");
        }
    }
}

} // namespace

std::string to_string(Shape s) { return fmt::format("[{}x{}]", s.rows, s.cols); }

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
    return from(rows, cols, std::vector<double>(rows * cols, value), requires_grad);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> data, bool requires_grad) {
    if (data.size() != rows * cols) {
        throw DimensionError(fmt::format("tensor data of length {} does not fill shape [{}x{}]",
                                         data.size(), rows, cols));
    }
    auto n = std::make_shared<detail::Node>();
    n->shape = {rows, cols};
    n->value = std::move(data);
    Tensor t(std::move(n));
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from(1, 1, {value}, requires_grad); }

detail::Node& Tensor::node() const {
    if (!node_) {
        throw UsageError("access to an undefined tensor");
    }
    return *node_;
}

double Tensor::at(std::size_t r, std::size_t c) const {
    const auto& n = node();
    if (r >= n.shape.rows || c >= n.shape.cols) {
        throw DimensionError(fmt::format("index ({},{}) outside {}", r, c, to_string(n.shape)));
    }
    return n.value[r * n.shape.cols + c];
}

double Tensor::item() const {
    const auto& n = node();
    if (n.shape.size() != 1) {
        throw DimensionError(fmt::format("item() on non-scalar tensor {}", to_string(n.shape)));
    }
    return n.value[0];
}

void Tensor::set_requires_grad(bool on) {
    auto& n = node();
    n.requires_grad = on;
    if (on) {
        n.grad.assign(n.value.size(), 0.0);
    } else {
        n.grad.clear();
        n.grad.shrink_to_fit();
    }
}

void Tensor::zero_grad() {
    auto& g = node().grad;
    std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::clone(bool requires_grad) const {
    const auto& n = node();
    return from(n.shape.rows, n.shape.cols, n.value, requires_grad);
}

Tensor make_result(Shape shape, std::vector<double> values) {
    if (finite_checks.load(std::memory_order_relaxed)) {
        check_finite(values);
    }
    auto n = std::make_shared<detail::Node>();
    n->shape = shape;
    n->value = std::move(values);
    return Tensor(std::move(n));
}

Tape* active_tape() noexcept { return current_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(current_tape) { current_tape = &tape; }
TapeScope::~TapeScope() { current_tape = previous_; }

NoGradScope::NoGradScope() : previous_(current_tape) { current_tape = nullptr; }
NoGradScope::~NoGradScope() { current_tape = previous_; }

Tensor record(Tensor output, std::vector<Tensor> inputs, BackwardFn backward) {
    Tape* tape = current_tape;
    if (tape == nullptr) {
        return output;
    }
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
    if (!any) {
        return output;
    }
    output.set_requires_grad(true);
    tape->entries_.push_back({std::move(inputs), output, std::move(backward)});
    return output;
}

void Tape::backward(const Tensor& loss) {
    if (loss.shape() != Shape{1, 1}) {
        throw UsageError(fmt::format("backward requires a scalar loss, got {}", to_string(loss.shape())));
    }
    if (!loss.requires_grad()) {
        throw UsageError("backward on a loss that does not depend on any trainable tensor");
    }
    // Locate the op that produced the loss; later entries cannot influence it.
    std::size_t end = entries_.size();
    while (end > 0 && !entries_[end - 1].output.same_storage(loss)) {
        --end;
    }
    for (std::size_t i = 0; i < end; ++i) {
        entries_[i].output.zero_grad();
    }
    Tensor seed = loss;
    seed.mutable_grad()[0] += 1.0;
    for (std::size_t i = end; i-- > 0;) {
        auto& e = entries_[i];
        e.backward(e.output, e.inputs);
    }
}

void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

void set_finite_checks(bool enabled) noexcept { finite_checks.store(enabled, std::memory_order_relaxed); }
bool finite_checks_enabled() noexcept { return finite_checks.load(std::memory_order_relaxed); }

} // namespace est
