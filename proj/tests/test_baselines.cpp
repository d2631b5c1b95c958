#include "est/baselines.hpp"
#include "est/grad_check.hpp"

#include "reference_est.hpp"
#include "test_util.hpp"

#include <cmath>

namespace est {
namespace {

using testing::bit_equal;
using testing::expect_values;
using testing::Mat;
using testing::random_tensor;
using testing::to_mat;

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Gate pre-activations x W_i + b_i and h W_h + b_h for gate column block g.
std::vector<double> gate(const std::vector<double>& x, const Mat& w, const std::vector<double>& b, std::size_t g,
                         std::size_t h) {
    std::vector<double> out(h);
    for (std::size_t j = 0; j < h; ++j) {
        double s = b[g * h + j];
        for (std::size_t i = 0; i < x.size(); ++i) {
            s += x[i] * w[i][g * h + j];
        }
        out[j] = s;
    }
    return out;
}

std::vector<double> affine_out(const std::vector<double>& h, const Tensor& w, const Tensor& b) {
    auto out = testing::vec_mat(h, to_mat(w));
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] += b.at(0, k);
    }
    return out;
}

RNNConfig rnn_config(std::size_t layers = 1) {
    RNNConfig c;
    c.hidden_size = 3;
    c.num_layers = layers;
    c.input_dim = 2;
    c.output_dim = 2;
    c.seed = 11;
    return c;
}

TEST(GRU, MatchesScalarReference) {
    GRUModel model(rnn_config(2));
    Rng rng = make_rng(1, "t");
    const Tensor tokens = random_tensor(4, 2, rng, false);
    const auto out = model.forward_sequence(tokens);
    const std::size_t h = 3;
    std::vector<std::vector<double>> hid(2, std::vector<double>(h, 0.0));
    for (std::size_t t = 0; t < 4; ++t) {
        std::vector<double> x{tokens.at(t, 0), tokens.at(t, 1)};
        for (std::size_t l = 0; l < 2; ++l) {
            const auto& y = model.layers[l];
            const Mat wi = to_mat(y.w_input), wh = to_mat(y.w_hidden);
            const auto bi = to_mat(y.b_input)[0], bh = to_mat(y.b_hidden)[0];
            const auto ri = gate(x, wi, bi, 0, h), rh = gate(hid[l], wh, bh, 0, h);
            const auto zi = gate(x, wi, bi, 1, h), zh = gate(hid[l], wh, bh, 1, h);
            const auto ni = gate(x, wi, bi, 2, h), nh = gate(hid[l], wh, bh, 2, h);
            std::vector<double> next(h);
            for (std::size_t j = 0; j < h; ++j) {
                const double r = sig(ri[j] + rh[j]), z = sig(zi[j] + zh[j]);
                const double n = std::tanh(ni[j] + r * nh[j]);
                next[j] = (1 - z) * n + z * hid[l][j];
            }
            hid[l] = next;
            x = next;
        }
        const auto want = affine_out(x, model.out_w, model.out_b);
        EXPECT_NEAR(out.at(t, 0), want[0], 1e-13);
        EXPECT_NEAR(out.at(t, 1), want[1], 1e-13);
    }
}

TEST(GRU, ZeroWeightsHalveTheHiddenState) {
    GRUModel model(rnn_config());
    for (auto& p : model.parameters()) {
        for (auto& v : p.mutable_data()) {
            v = 0.0;
        }
    }
    model.reset_state();
    // Start from h = 1: r = z = 1/2, n = 0, so h' = h / 2.
    const_cast<Tensor&>(model.hidden()[0]) = Tensor::full(1, 3, 1.0);
    (void)model.forward_step(Tensor::zeros(1, 2));
    expect_values(model.hidden()[0], {0.5, 0.5, 0.5}, 0.0);
}

TEST(LSTM, MatchesScalarReference) {
    LSTMModel model(rnn_config(2));
    Rng rng = make_rng(2, "t");
    const Tensor tokens = random_tensor(4, 2, rng, false);
    const auto out = model.forward_sequence(tokens);
    const std::size_t h = 3;
    std::vector<std::vector<double>> hid(2, std::vector<double>(h, 0.0)), cell = hid;
    for (std::size_t t = 0; t < 4; ++t) {
        std::vector<double> x{tokens.at(t, 0), tokens.at(t, 1)};
        for (std::size_t l = 0; l < 2; ++l) {
            const auto& y = model.layers[l];
            const Mat wi = to_mat(y.w_input), wh = to_mat(y.w_hidden);
            const auto bi = to_mat(y.b_input)[0], bh = to_mat(y.b_hidden)[0];
            std::vector<std::vector<double>> pre(4);
            for (std::size_t g = 0; g < 4; ++g) {
                const auto a = gate(x, wi, bi, g, h), b = gate(hid[l], wh, bh, g, h);
                pre[g].resize(h);
                for (std::size_t j = 0; j < h; ++j) {
                    pre[g][j] = a[j] + b[j];
                }
            }
            for (std::size_t j = 0; j < h; ++j) {
                const double i = sig(pre[0][j]), f = sig(pre[1][j]), g = std::tanh(pre[2][j]), o = sig(pre[3][j]);
                cell[l][j] = f * cell[l][j] + i * g;
                hid[l][j] = o * std::tanh(cell[l][j]);
            }
            x = hid[l];
        }
        const auto want = affine_out(x, model.out_w, model.out_b);
        EXPECT_NEAR(out.at(t, 0), want[0], 1e-13);
        EXPECT_NEAR(out.at(t, 1), want[1], 1e-13);
    }
}

TEST(LSTM, ForgetGateSaturatedKeepsCell) {
    LSTMModel model(rnn_config());
    for (auto& p : model.parameters()) {
        for (auto& v : p.mutable_data()) {
            v = 0.0;
        }
    }
    // Forget gate block is the second; input gate the first.
    for (std::size_t j = 0; j < 3; ++j) {
        model.layers[0].b_input.mutable_data()[3 + j] = 50.0;
        model.layers[0].b_input.mutable_data()[j] = -50.0;
    }
    model.reset_state();
    const_cast<Tensor&>(model.cell()[0]) = Tensor::from(1, 3, {0.3, -0.2, 1.0});
    (void)model.forward_step(Tensor::from(1, 2, {5, -5}));
    expect_values(model.cell()[0], {0.3, -0.2, 1.0}, 1e-15);
}

TEST(RecurrentBaselines, StepBeforeResetIsAnError) {
    GRUModel gru(rnn_config());
    LSTMModel lstm(rnn_config());
    EXPECT_THROW(gru.forward_step(Tensor::zeros(1, 2)), UsageError);
    EXPECT_THROW(lstm.forward_step(Tensor::zeros(1, 2)), UsageError);
}

TEST(RecurrentBaselines, GradientsMatchFiniteDifferences) {
    Rng rng = make_rng(3, "t");
    const Tensor tokens = random_tensor(3, 2, rng, false);
    const Tensor probe = random_tensor(3, 2, rng, false);
    GRUModel gru(rnn_config(2));
    EXPECT_LT(grad_check([&] { return sum(mul(gru.forward_sequence(tokens), probe)); }, gru.parameters()), 1e-4);
    LSTMModel lstm(rnn_config(2));
    EXPECT_LT(grad_check([&] { return sum(mul(lstm.forward_sequence(tokens), probe)); }, lstm.parameters()),
              1e-4);
}

TEST(RecurrentBaselines, ParameterCounts) {
    RNNConfig c;
    c.hidden_size = 12;
    c.input_dim = 4;
    c.output_dim = 4;
    EXPECT_EQ(count_gru_parameters(c), 700u);
    EXPECT_EQ(GRUModel(c).count_parameters(), 700u);
    c.hidden_size = 10;
    EXPECT_EQ(count_lstm_parameters(c), 684u);
    EXPECT_EQ(LSTMModel(c).count_parameters(), 684u);
    c.num_layers = 3;
    EXPECT_EQ(count_lstm_parameters(c), LSTMModel(c).count_parameters());
    EXPECT_EQ(count_gru_parameters(c), GRUModel(c).count_parameters());
}

TransformerConfig tf_config() {
    TransformerConfig c;
    c.d_model = 4;
    c.nhead = 2;
    c.num_layers = 2;
    c.dim_feedforward = 5;
    c.input_dim = 2;
    c.output_dim = 1;
    c.max_len = 16;
    c.seed = 3;
    return c;
}

std::vector<double> layer_norm(std::vector<double> x, const Tensor& gamma, const Tensor& beta) {
    double mu = 0;
    for (double v : x) {
        mu += v;
    }
    mu /= static_cast<double>(x.size());
    double var = 0;
    for (double v : x) {
        var += (v - mu) * (v - mu);
    }
    var /= static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = (x[i] - mu) / std::sqrt(var + 1e-5) * gamma.at(0, i) + beta.at(0, i);
    }
    return x;
}

TEST(Transformer, MatchesScalarReference) {
    TransformerModel model(tf_config());
    Rng rng = make_rng(4, "t");
    // Non-trivial norm parameters and biases.
    for (auto& p : model.parameters()) {
        for (auto& v : p.mutable_data()) {
            v += 0.1 * uniform(rng, -1.0, 1.0);
        }
    }
    const std::size_t t_len = 5, d = 4, heads = 2, dh = 2;
    const Tensor tokens = random_tensor(t_len, 2, rng, false);
    const auto out = model.forward_sequence(tokens);

    Mat x(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        x[t] = affine_out({tokens.at(t, 0), tokens.at(t, 1)}, model.embed_w, model.embed_b);
        for (std::size_t i = 0; i < d; ++i) {
            const double angle = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(i - i % 2) / 4.0);
            x[t][i] += i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    for (const auto& y : model.layers) {
        Mat qkv(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            qkv[t] = affine_out(x[t], y.w_qkv, y.b_qkv);
        }
        Mat next(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            std::vector<double> cat;
            for (std::size_t h = 0; h < heads; ++h) {
                std::vector<double> q(qkv[t].begin() + h * dh, qkv[t].begin() + (h + 1) * dh);
                Mat keys, values;
                for (std::size_t s = 0; s <= t; ++s) {
                    keys.emplace_back(qkv[s].begin() + d + h * dh, qkv[s].begin() + d + (h + 1) * dh);
                    values.emplace_back(qkv[s].begin() + 2 * d + h * dh, qkv[s].begin() + 2 * d + (h + 1) * dh);
                }
                const auto a = testing::attend(q, keys, values);
                cat.insert(cat.end(), a.begin(), a.end());
            }
            auto attn = affine_out(cat, y.w_o, y.b_o);
            for (std::size_t i = 0; i < d; ++i) {
                attn[i] += x[t][i];
            }
            auto h1 = layer_norm(attn, y.norm1_gamma, y.norm1_beta);
            auto hidden = affine_out(h1, y.w_ff1, y.b_ff1);
            for (auto& v : hidden) {
                v = std::max(0.0, v);
            }
            auto f = affine_out(hidden, y.w_ff2, y.b_ff2);
            for (std::size_t i = 0; i < d; ++i) {
                f[i] += h1[i];
            }
            next[t] = layer_norm(f, y.norm2_gamma, y.norm2_beta);
        }
        x = next;
    }
    for (std::size_t t = 0; t < t_len; ++t) {
        EXPECT_NEAR(out.at(t, 0), affine_out(x[t], model.out_w, model.out_b)[0], 1e-12);
    }
}

TEST(Transformer, OutputsAreCausal) {
    TransformerModel model(tf_config());
    Rng rng = make_rng(5, "t");
    const Tensor tokens = random_tensor(6, 2, rng, false);
    const auto base = model.forward_sequence(tokens);
    Tensor changed = tokens.clone();
    changed.mutable_data()[3 * 2] += 1.0;
    const auto moved = model.forward_sequence(changed);
    for (std::size_t t = 0; t < 3; ++t) {
        EXPECT_EQ(base.at(t, 0), moved.at(t, 0));
    }
    EXPECT_NE(base.at(3, 0), moved.at(3, 0));
}

TEST(Transformer, CapacityAndConfigErrors) {
    TransformerModel model(tf_config());
    EXPECT_THROW(model.forward_sequence(Tensor::zeros(17, 2)), CapacityError);
    EXPECT_NO_THROW(model.forward_sequence(Tensor::zeros(16, 2)));
    TransformerConfig bad = tf_config();
    bad.nhead = 3;
    EXPECT_THROW(TransformerModel{bad}, ConfigError);
}

TEST(Transformer, GradientsMatchFiniteDifferences) {
    TransformerModel model(tf_config());
    Rng rng = make_rng(6, "t");
    const Tensor tokens = random_tensor(4, 2, rng, false);
    const Tensor probe = random_tensor(4, 1, rng, false);
    EXPECT_LT(grad_check([&] { return sum(mul(model.forward_sequence(tokens), probe)); }, model.parameters()),
              1e-4);
}

TEST(Transformer, ParameterCounts) {
    TransformerConfig c;
    c.input_dim = 4;
    c.output_dim = 4;
    EXPECT_EQ(count_parameters(c), 897u);
    EXPECT_EQ(TransformerModel(c).count_parameters(), 897u);
    const auto t = tf_config();
    EXPECT_EQ(count_parameters(t), TransformerModel(t).count_parameters());
}

TEST(Baselines, ConfigsRoundTripThroughJson) {
    const nlohmann::json r = rnn_config(2);
    EXPECT_EQ(r.get<RNNConfig>().num_layers, 2u);
    const nlohmann::json t = tf_config();
    const auto back = t.get<TransformerConfig>();
    EXPECT_EQ(back.max_len, 16u);
    EXPECT_EQ(back.nhead, 2u);
}

} // namespace
} // namespace est
