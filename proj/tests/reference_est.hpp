#pragma once

// Straight-line scalar re-implementation of one EST step on plain vectors. It
// reads weights out of an ESTModel but performs every product, softmax, and
// update with its own loops, so it shares no arithmetic with the tensor ops.

#include "est/est_model.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace est::testing {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Tensor& t) {
    Mat m(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t j = 0; j < t.cols(); ++j) {
            m[i][j] = t.at(i, j);
        }
    }
    return m;
}

inline std::vector<double> vec_mat(const std::vector<double>& v, const Mat& m) {
    std::vector<double> out(m.empty() ? 0 : m[0].size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] += v[i] * m[i][j];
        }
    }
    return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

inline std::vector<double> softmax(const std::vector<double>& x) {
    const double mx = *std::max_element(x.begin(), x.end());
    std::vector<double> e(x.size());
    double total = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = std::exp(x[i] - mx);
        total += e[i];
    }
    for (auto& v : e) {
        v /= total;
    }
    return e;
}

/// Attention of one query row over key/value rows.
inline std::vector<double> attend(const std::vector<double>& q, const Mat& keys, const Mat& values) {
    std::vector<double> scores(keys.size());
    for (std::size_t j = 0; j < keys.size(); ++j) {
        scores[j] = dot(q, keys[j]) / std::sqrt(static_cast<double>(q.size()));
    }
    const auto w = softmax(scores);
    std::vector<double> out(values[0].size(), 0.0);
    for (std::size_t j = 0; j < values.size(); ++j) {
        for (std::size_t c = 0; c < out.size(); ++c) {
            out[c] += w[j] * values[j][c];
        }
    }
    return out;
}

inline std::vector<double> row(const Tensor& t) { return to_mat(t)[0]; }

struct ReferenceEST {
    const ESTModel& model;
    std::vector<Mat> memory; // per layer, M x d_m

    explicit ReferenceEST(const ESTModel& m) : model(m) {
        const auto& c = m.config();
        memory.assign(c.num_layers, Mat(c.memory_units, std::vector<double>(c.memory_dim, 0.0)));
    }

    std::vector<double> step(const std::vector<double>& token) {
        const auto& c = model.config();
        std::vector<double> x = vec_mat(token, to_mat(model.embed_w));
        const auto eb = row(model.embed_b);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += eb[i];
        }
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            const auto& layer = model.layers[l];
            Mat& s = memory[l];
            const std::size_t m = c.memory_units;
            // Previous-state attention, one head per unit, residual embedding.
            Mat unit_in(m);
            for (std::size_t i = 0; i < m; ++i) {
                const auto& h = layer.state_heads[i];
                const auto q = vec_mat(x, to_mat(h.w_q));
                Mat keys, values;
                for (const auto& srow : s) {
                    keys.push_back(vec_mat(srow, to_mat(h.w_k)));
                    values.push_back(vec_mat(srow, to_mat(h.w_v)));
                }
                auto a = attend(q, keys, values);
                for (std::size_t k = 0; k < a.size(); ++k) {
                    a[k] += x[k];
                }
                unit_in[i] = a;
            }
            // Adaptive leak rates.
            std::vector<double> scores(m);
            for (std::size_t i = 0; i < m; ++i) {
                const auto& u = layer.units[i];
                const Mat sw = to_mat(u.score_w);
                double z = u.score_b.item();
                for (std::size_t k = 0; k < sw.size(); ++k) {
                    z += unit_in[i][k] * sw[k][0];
                }
                scores[i] = z;
            }
            const auto alpha = softmax(scores);
            // Leaky reservoir updates.
            Mat next(m);
            for (std::size_t i = 0; i < m; ++i) {
                const auto& u = layer.units[i];
                const Mat w_hat = to_mat(u.w_hat);
                const auto drive = vec_mat(unit_in[i], to_mat(u.w_in));
                next[i].resize(c.memory_dim);
                for (std::size_t a = 0; a < c.memory_dim; ++a) {
                    double rec = 0;
                    for (std::size_t b = 0; b < c.memory_dim; ++b) {
                        rec += u.rho.item() * w_hat[a][b] * s[i][b];
                    }
                    next[i][a] = (1 - alpha[i]) * s[i][a] + alpha[i] * std::tanh(drive[a] + rec);
                }
            }
            s = next;
            // Self-attention over units with state residual, flatten, reduce.
            const auto& sh = layer.self_head;
            std::vector<double> flat;
            for (std::size_t i = 0; i < m; ++i) {
                const auto q = vec_mat(s[i], to_mat(sh.w_q));
                Mat keys, values;
                for (const auto& srow : s) {
                    keys.push_back(vec_mat(srow, to_mat(sh.w_k)));
                    values.push_back(vec_mat(srow, to_mat(sh.w_v)));
                }
                auto a = attend(q, keys, values);
                for (std::size_t k = 0; k < a.size(); ++k) {
                    flat.push_back(a[k] + s[i][k]);
                }
            }
            const auto h = vec_mat(flat, to_mat(layer.reduce));
            // Feed-forward with residual.
            auto hidden = vec_mat(h, to_mat(layer.ff.w1));
            const auto b1 = row(layer.ff.b1);
            for (std::size_t k = 0; k < hidden.size(); ++k) {
                hidden[k] = std::max(0.0, hidden[k] + b1[k]);
            }
            auto y = vec_mat(hidden, to_mat(layer.ff.w2));
            const auto b2 = row(layer.ff.b2);
            for (std::size_t k = 0; k < y.size(); ++k) {
                y[k] += b2[k] + h[k];
            }
            x = y;
        }
        auto out = vec_mat(x, to_mat(model.out_w));
        const auto ob = row(model.out_b);
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] += ob[k];
        }
        return out;
    }

};

} // namespace est::testing
