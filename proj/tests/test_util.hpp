#pragma once

#include "est/rng.hpp"
#include "est/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace est::testing {

inline Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, bool requires_grad = true,
                            double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) {
        x = uniform(rng, lo, hi);
    }
    return Tensor::from(rows, cols, std::move(v), requires_grad);
}

inline void expect_values(const Tensor& t, const std::vector<double>& expected, double tol = 1e-12) {
    ASSERT_EQ(t.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        EXPECT_NEAR(t.data()[i], expected[i], tol) << "entry " << i;
    }
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.data()[i] != b.data()[i]) {
            return false;
        }
    }
    return true;
}

} // namespace est::testing
