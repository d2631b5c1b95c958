#pragma once

#include "est/tensor.hpp"

#include <functional>
#include <vector>

namespace est {

/// Compares tape gradients of a scalar function against central differences.
///
/// `f` must be deterministic and rebuild its graph from `params` on every call.
/// Returns the maximum over all parameter entries of
/// |analytic - numeric| / max(1, |numeric|). Gradients of `params` are left
/// holding the analytic values.
double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double eps = 1e-5);

} // namespace est
