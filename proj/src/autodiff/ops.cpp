#include "est/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <fmt/format.h>

namespace est {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(fmt::format("{}: shapes {} and {} differ", op, to_string(a.shape()),
                                         to_string(b.shape())));
    }
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) {
                continue;
            }
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

// c[m x n] += a[m x k] * b[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += arow[p] * brow[p];
            }
            c[i * n + j] += acc;
        }
    }
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) {
                continue;
            }
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

template <typename F>
Tensor unary(const Tensor& x, F f) {
    std::vector<double> out(x.size());
    const auto xv = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = f(xv[i]);
    }
    return make_result(x.shape(), std::move(out));
}

} // namespace

Mask Mask::causal(std::size_t n) {
    Mask m{n, n, std::vector<std::uint8_t>(n * n, 0)};
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c <= r; ++c) {
            m.allowed[r * n + c] = 1;
        }
    }
    return m;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError(fmt::format("matmul: inner dimensions of {} and {} disagree",
                                         to_string(a.shape()), to_string(b.shape())));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
    return record(make_result({m, n}, std::move(out)), {a, b},
                  [m, k, n](const Tensor& o, std::span<Tensor> in) {
                      const double* g = o.grad().data();
                      if (in[0].requires_grad()) {
                          gemm_nt(g, in[1].data().data(), in[0].mutable_grad().data(), m, n, k);
                      }
                      if (in[1].requires_grad()) {
                          gemm_tn(in[0].data().data(), g, in[1].mutable_grad().data(), m, k, n);
                      }
                  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError(fmt::format("matmul_nt: column counts of {} and {} disagree",
                                         to_string(a.shape()), to_string(b.shape())));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    std::vector<double> out(m * n, 0.0);
    gemm_nt(a.data().data(), b.data().data(), out.data(), m, k, n);
    return record(make_result({m, n}, std::move(out)), {a, b},
                  [m, k, n](const Tensor& o, std::span<Tensor> in) {
                      const double* g = o.grad().data();
                      // dA = G * B, dB = G^T * A
                      if (in[0].requires_grad()) {
                          gemm_nn(g, in[1].data().data(), in[0].mutable_grad().data(), m, n, k);
                      }
                      if (in[1].requires_grad()) {
                          gemm_tn(g, in[0].data().data(), in[1].mutable_grad().data(), m, n, k);
                      }
                  });
}

Tensor transpose(const Tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r * c);
    const auto av = a.data();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out[j * r + i] = av[i * c + j];
        }
    }
    return record(make_result({c, r}, std::move(out)), {a}, [r, c](const Tensor& o, std::span<Tensor> in) {
        const auto g = o.grad();
        auto ga = in[0].mutable_grad();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                ga[i * c + j] += g[j * r + i];
            }
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.data().begin(), a.data().end());
    const auto bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += bv[i];
    }
    return record(make_result(a.shape(), std::move(out)), {a, b}, [](const Tensor& o, std::span<Tensor> in) {
        const auto g = o.grad();
        for (auto& t : in) {
            if (t.requires_grad()) {
                auto gt = t.mutable_grad();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gt[i] += g[i];
                }
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.data().begin(), a.data().end());
    const auto bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] -= bv[i];
    }
    return record(make_result(a.shape(), std::move(out)), {a, b}, [](const Tensor& o, std::span<Tensor> in) {
        const auto g = o.grad();
        if (in[0].requires_grad()) {
            auto ga = in[0].mutable_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
            }
        }
        if (in[1].requires_grad()) {
            auto gb = in[1].mutable_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] -= g[i];
            }
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.data().begin(), a.data().end());
    const auto bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= bv[i];
    }
    return record(make_result(a.shape(), std::move(out)), {a, b}, [](const Tensor& o, std::span<Tensor> in) {
        const auto g = o.grad();
        const auto av = in[0].data();
        const auto bv = in[1].data();
        if (in[0].requires_grad()) {
            auto ga = in[0].mutable_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * bv[i];
            }
        }
        if (in[1].requires_grad()) {
            auto gb = in[1].mutable_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] += g[i] * av[i];
            }
        }
    });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    if (bias.rows() != 1 || bias.cols() != x.cols()) {
        throw DimensionError(fmt::format("add_bias: bias {} does not match rows of {}",
                                         to_string(bias.shape()), to_string(x.shape())));
    }
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(x.data().begin(), x.data().end());
    const auto bv = bias.data();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] += bv[j];
        }
    }
    return record(make_result(x.shape(), std::move(out)), {x, bias},
                  [r, c](const Tensor& o, std::span<Tensor> in) {
                      const auto g = o.grad();
                      if (in[0].requires_grad()) {
                          auto gx = in[0].mutable_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) {
                              gx[i] += g[i];
                          }
                      }
                      if (in[1].requires_grad()) {
                          auto gb = in[1].mutable_grad();
                          for (std::size_t i = 0; i < r; ++i) {
                              for (std::size_t j = 0; j < c; ++j) {
                                  gb[j] += g[i * c + j];
                              }
                          }
                      }
                  });
}

Tensor scale(const Tensor& x, double c) {
    auto out = unary(x, [c](double v) { return c * v; });
    return record(std::move(out), {x}, [c](const Tensor& o, std::span<Tensor> in) {
        const auto g = o.grad();
        auto gx = in[0].mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx[i] += c * g[i];
        }
    });
}

Tensor add_constant(const Tensor& x, double c) {
    auto out = unary(x, [c](double v) { return v + c; });
    return record(std::move(out), {x}, [](const Tensor& o, std::span<Tensor> in) {
        const auto g = o.grad();
        auto gx = in[0].mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx[i] += g[i];
        }
    });
}

Tensor mul_scalar(const Tensor& s, const Tensor& x) {
    if (s.shape() != Shape{1, 1}) {
        throw DimensionError(fmt::format("mul_scalar: expected a 1x1 scale, got {}", to_string(s.shape())));
    }
    const double sv = s.item();
    auto out = unary(x, [sv](double v) { return sv * v; });
    return record(std::move(out), {s, x}, [](const Tensor& o, std::span<Tensor> in) {
        const auto g = o.grad();
        const double sv = in[0].item();
        if (in[0].requires_grad()) {
            const auto xv = in[1].data();
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                acc += g[i] * xv[i];
            }
            in[0].mutable_grad()[0] += acc;
        }
        if (in[1].requires_grad()) {
            auto gx = in[1].mutable_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                gx[i] += sv * g[i];
            }
        }
    });
}

Tensor tanh(const Tensor& x) {
    auto out = unary(x, [](double v) { return std::tanh(v); });
    return record(std::move(out), {x}, [](const Tensor& o, std::span<Tensor> in) {
        const auto g = o.grad();
        const auto y = o.data();
        auto gx = in[0].mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx[i] += g[i] * (1.0 - y[i] * y[i]);
        }
    });
}

Tensor sigmoid(const Tensor& x) {
    auto out = unary(x, [](double v) {
        if (v >= 0.0) {
            return 1.0 / (1.0 + std::exp(-v));
        }
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
    return record(std::move(out), {x}, [](const Tensor& o, std::span<Tensor> in) {
        const auto g = o.grad();
        const auto y = o.data();
        auto gx = in[0].mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx[i] += g[i] * y[i] * (1.0 - y[i]);
        }
    });
}

Tensor relu(const Tensor& x) {
    auto out = unary(x, [](double v) { return v > 0.0 ? v : 0.0; });
    return record(std::move(out), {x}, [](const Tensor& o, std::span<Tensor> in) {
        const auto g = o.grad();
        const auto xv = in[0].data();
        auto gx = in[0].mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (xv[i] > 0.0) {
                gx[i] += g[i];
            }
        }
    });
}

namespace {

Tensor softmax_impl(const Tensor& x, const Mask* mask) {
    const std::size_t r = x.rows(), c = x.cols();
    if (mask != nullptr && (mask->rows != r || mask->cols != c)) {
        throw DimensionError(fmt::format("softmax_rows: mask [{}x{}] does not match {}", mask->rows,
                                         mask->cols, to_string(x.shape())));
    }
    const auto xv = x.data();
    std::vector<double> out(r * c, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t j = 0; j < c; ++j) {
            if (mask == nullptr || mask->at(i, j)) {
                mx = std::max(mx, xv[i * c + j]);
                any = true;
            }
        }
        if (!any) {
            throw DimensionError(fmt::format("softmax_rows: row {} is fully masked", i));
        }
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (mask == nullptr || mask->at(i, j)) {
                const double e = std::exp(xv[i * c + j] - mx);
                out[i * c + j] = e;
                total += e;
            }
        }
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] /= total;
        }
    }
    return record(make_result(x.shape(), std::move(out)), {x}, [r, c](const Tensor& o, std::span<Tensor> in) {
        // dx_j = y_j * (g_j - sum_k g_k y_k); masked entries have y = 0.
        const auto g = o.grad();
        const auto y = o.data();
        auto gx = in[0].mutable_grad();
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                dot += g[i * c + j] * y[i * c + j];
            }
            for (std::size_t j = 0; j < c; ++j) {
                gx[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
            }
        }
    });
}

} // namespace

Tensor softmax_rows(const Tensor& x) { return softmax_impl(x, nullptr); }
Tensor softmax_rows(const Tensor& x, const Mask& mask) { return softmax_impl(x, &mask); }

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw DimensionError("concat_rows: no parts");
    }
    const std::size_t c = parts.front().cols();
    std::size_t r = 0;
    for (const auto& p : parts) {
        if (p.cols() != c) {
            throw DimensionError(fmt::format("concat_rows: column mismatch {} vs {}", to_string(p.shape()),
                                             to_string(parts.front().shape())));
        }
        r += p.rows();
    }
    std::vector<double> out;
    out.reserve(r * c);
    for (const auto& p : parts) {
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return record(make_result({r, c}, std::move(out)), std::vector<Tensor>(parts.begin(), parts.end()),
                  [](const Tensor& o, std::span<Tensor> in) {
                      const auto g = o.grad();
                      std::size_t offset = 0;
                      for (auto& t : in) {
                          const std::size_t n = t.size();
                          if (t.requires_grad()) {
                              auto gt = t.mutable_grad();
                              for (std::size_t i = 0; i < n; ++i) {
                                  gt[i] += g[offset + i];
                              }
                          }
                          offset += n;
                      }
                  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw DimensionError("concat_cols: no parts");
    }
    const std::size_t r = parts.front().rows();
    std::size_t c = 0;
    for (const auto& p : parts) {
        if (p.rows() != r) {
            throw DimensionError(fmt::format("concat_cols: row mismatch {} vs {}", to_string(p.shape()),
                                             to_string(parts.front().shape())));
        }
        c += p.cols();
    }
    std::vector<double> out(r * c);
    std::size_t col0 = 0;
    for (const auto& p : parts) {
        const auto pv = p.data();
        const std::size_t pc = p.cols();
        for (std::size_t i = 0; i < r; ++i) {
            std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(i * pc), pc,
                        out.begin() + static_cast<std::ptrdiff_t>(i * c + col0));
        }
        col0 += pc;
    }
    return record(make_result({r, c}, std::move(out)), std::vector<Tensor>(parts.begin(), parts.end()),
                  [r, c](const Tensor& o, std::span<Tensor> in) {
                      const auto g = o.grad();
                      std::size_t col0 = 0;
                      for (auto& t : in) {
                          const std::size_t pc = t.cols();
                          if (t.requires_grad()) {
                              auto gt = t.mutable_grad();
                              for (std::size_t i = 0; i < r; ++i) {
                                  for (std::size_t j = 0; j < pc; ++j) {
                                      gt[i * pc + j] += g[i * c + col0 + j];
                                  }
                              }
                          }
                          col0 += pc;
                      }
                  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
    if (count == 0 || begin + count > x.rows()) {
        throw DimensionError(fmt::format("slice_rows: [{}, {}) outside {}", begin, begin + count,
                                         to_string(x.shape())));
    }
    const std::size_t c = x.cols();
    const auto first = x.data().begin() + static_cast<std::ptrdiff_t>(begin * c);
    std::vector<double> out(first, first + static_cast<std::ptrdiff_t>(count * c));
    return record(make_result({count, c}, std::move(out)), {x},
                  [begin, c](const Tensor& o, std::span<Tensor> in) {
                      const auto g = o.grad();
                      auto gx = in[0].mutable_grad();
                      for (std::size_t i = 0; i < g.size(); ++i) {
                          gx[begin * c + i] += g[i];
                      }
                  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
    if (count == 0 || begin + count > x.cols()) {
        throw DimensionError(fmt::format("slice_cols: [{}, {}) outside {}", begin, begin + count,
                                         to_string(x.shape())));
    }
    const std::size_t r = x.rows(), c = x.cols();
    const auto xv = x.data();
    std::vector<double> out(r * count);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < count; ++j) {
            out[i * count + j] = xv[i * c + begin + j];
        }
    }
    return record(make_result({r, count}, std::move(out)), {x},
                  [r, c, begin, count](const Tensor& o, std::span<Tensor> in) {
                      const auto g = o.grad();
                      auto gx = in[0].mutable_grad();
                      for (std::size_t i = 0; i < r; ++i) {
                          for (std::size_t j = 0; j < count; ++j) {
                              gx[i * c + begin + j] += g[i * count + j];
                          }
                      }
                  });
}

Tensor reshape(const Tensor& x, std::size_t rows, std::size_t cols) {
    if (rows * cols != x.size()) {
        throw DimensionError(fmt::format("reshape: {} cannot become [{}x{}]", to_string(x.shape()), rows, cols));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    return record(make_result({rows, cols}, std::move(out)), {x}, [](const Tensor& o, std::span<Tensor> in) {
        const auto g = o.grad();
        auto gx = in[0].mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx[i] += g[i];
        }
    });
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) {
        acc += v;
    }
    return record(make_result({1, 1}, {acc}), {x}, [](const Tensor& o, std::span<Tensor> in) {
        const double g = o.grad()[0];
        for (double& v : in[0].mutable_grad()) {
            v += g;
        }
    });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t r = x.rows(), c = x.cols();
    if (gamma.shape() != Shape{1, c} || beta.shape() != Shape{1, c}) {
        throw DimensionError(fmt::format("layer_norm_rows: gamma {} / beta {} must be [1x{}]",
                                         to_string(gamma.shape()), to_string(beta.shape()), c));
    }
    auto xhat = std::make_shared<std::vector<double>>(r * c);
    auto inv_std = std::make_shared<std::vector<double>>(r);
    const auto xv = x.data();
    const auto gv = gamma.data();
    const auto bv = beta.data();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            mu += xv[i * c + j];
        }
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = xv[i * c + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < c; ++j) {
            const double h = (xv[i * c + j] - mu) * is;
            (*xhat)[i * c + j] = h;
            out[i * c + j] = gv[j] * h + bv[j];
        }
    }
    return record(make_result(x.shape(), std::move(out)), {x, gamma, beta},
                  [r, c, xhat, inv_std](const Tensor& o, std::span<Tensor> in) {
                      const auto g = o.grad();
                      const auto gv = in[1].data();
                      const auto& h = *xhat;
                      if (in[1].requires_grad() || in[2].requires_grad()) {
                          auto gg = in[1].requires_grad() ? in[1].mutable_grad() : std::span<double>{};
                          auto gb = in[2].requires_grad() ? in[2].mutable_grad() : std::span<double>{};
                          for (std::size_t i = 0; i < r; ++i) {
                              for (std::size_t j = 0; j < c; ++j) {
                                  if (!gg.empty()) {
                                      gg[j] += g[i * c + j] * h[i * c + j];
                                  }
                                  if (!gb.empty()) {
                                      gb[j] += g[i * c + j];
                                  }
                              }
                          }
                      }
                      if (in[0].requires_grad()) {
                          auto gx = in[0].mutable_grad();
                          const double n = static_cast<double>(c);
                          for (std::size_t i = 0; i < r; ++i) {
                              double sum_d = 0.0, sum_dh = 0.0;
                              for (std::size_t j = 0; j < c; ++j) {
                                  const double d = g[i * c + j] * gv[j];
                                  sum_d += d;
                                  sum_dh += d * h[i * c + j];
                              }
                              const double is = (*inv_std)[i];
                              for (std::size_t j = 0; j < c; ++j) {
                                  const double d = g[i * c + j] * gv[j];
                                  gx[i * c + j] += is * (d - sum_d / n - h[i * c + j] * sum_dh / n);
                              }
                          }
                      }
                  });
}

Tensor masked_cross_entropy(const Tensor& logits, const Tensor& targets, std::span<const std::uint8_t> row_mask,
                            double denominator) {
    require_same_shape(logits, targets, "masked_cross_entropy");
    const std::size_t r = logits.rows(), c = logits.cols();
    if (row_mask.size() != r) {
        throw DimensionError(fmt::format("masked_cross_entropy: mask of length {} for {} rows", row_mask.size(), r));
    }
    auto probs = std::make_shared<std::vector<double>>(r * c, 0.0);
    const auto lv = logits.data();
    const auto tv = targets.data();
    double loss = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        if (row_mask[i] == 0) {
            continue;
        }
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) {
            mx = std::max(mx, lv[i * c + j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            total += std::exp(lv[i * c + j] - mx);
        }
        const double log_z = mx + std::log(total);
        for (std::size_t j = 0; j < c; ++j) {
            const double lp = lv[i * c + j] - log_z;
            (*probs)[i * c + j] = std::exp(lp);
            loss -= tv[i * c + j] * lp;
        }
    }
    loss /= denominator;
    std::vector<std::uint8_t> mask(row_mask.begin(), row_mask.end());
    return record(make_result({1, 1}, {loss}), {logits, targets},
                  [r, c, probs, mask = std::move(mask), denominator](const Tensor& o, std::span<Tensor> in) {
                      const double g = o.grad()[0] / denominator;
                      const auto tv = in[1].data();
                      if (in[0].requires_grad()) {
                          auto gl = in[0].mutable_grad();
                          for (std::size_t i = 0; i < r; ++i) {
                              if (mask[i] == 0) {
                                  continue;
                              }
                              double tsum = 0.0;
                              for (std::size_t j = 0; j < c; ++j) {
                                  tsum += tv[i * c + j];
                              }
                              for (std::size_t j = 0; j < c; ++j) {
                                  gl[i * c + j] += g * ((*probs)[i * c + j] * tsum - tv[i * c + j]);
                              }
                          }
                      }
                      if (in[1].requires_grad()) {
                          auto gt = in[1].mutable_grad();
                          for (std::size_t i = 0; i < r; ++i) {
                              if (mask[i] == 0) {
                                  continue;
                              }
                              for (std::size_t j = 0; j < c; ++j) {
                                  gt[i * c + j] -= g * std::log((*probs)[i * c + j]);
                              }
                          }
                      }
                  });
}

Tensor masked_mse(const Tensor& prediction, const Tensor& targets, std::span<const std::uint8_t> row_mask,
                  double denominator) {
    require_same_shape(prediction, targets, "masked_mse");
    const std::size_t r = prediction.rows(), c = prediction.cols();
    if (row_mask.size() != r) {
        throw DimensionError(fmt::format("masked_mse: mask of length {} for {} rows", row_mask.size(), r));
    }
    const auto pv = prediction.data();
    const auto tv = targets.data();
    double loss = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        if (row_mask[i] == 0) {
            continue;
        }
        for (std::size_t j = 0; j < c; ++j) {
            const double d = pv[i * c + j] - tv[i * c + j];
            loss += d * d;
        }
    }
    const double norm = denominator * static_cast<double>(c);
    loss /= norm;
    std::vector<std::uint8_t> mask(row_mask.begin(), row_mask.end());
    return record(make_result({1, 1}, {loss}), {prediction, targets},
                  [r, c, mask = std::move(mask), norm](const Tensor& o, std::span<Tensor> in) {
                      const double g = 2.0 * o.grad()[0] / norm;
                      const auto pv = in[0].data();
                      const auto tv = in[1].data();
                      for (std::size_t i = 0; i < r; ++i) {
                          if (mask[i] == 0) {
                              continue;
                          }
                          for (std::size_t j = 0; j < c; ++j) {
                              const double d = g * (pv[i * c + j] - tv[i * c + j]);
                              if (in[0].requires_grad()) {
                                  in[0].mutable_grad()[i * c + j] += d;
                              }
                              if (in[1].requires_grad()) {
                                  in[1].mutable_grad()[i * c + j] -= d;
                              }
                          }
                      }
                  });
}

} // namespace est
