#pragma once

// Comparison models trained under the same contract as the EST: GRU and LSTM
// (sequential, PyTorch gate conventions with separate input/hidden biases) and a
// decoder-only Transformer (post-norm layers, causal mask, sinusoidal positions)
// that recomputes the whole prefix for every prediction.

#include "est/ops.hpp"
#include "est/sequence_model.hpp"

#include <cstdint>
#include <vector>

namespace est {

struct RNNConfig {
    std::size_t hidden_size = 12;
    std::size_t num_layers = 1;
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

// Distinct types so a configuration alone identifies the family.
struct GRUConfig : RNNConfig {};
struct LSTMConfig : RNNConfig {};

void to_json(nlohmann::json& j, const RNNConfig& c);
void from_json(const nlohmann::json& j, RNNConfig& c);

/// Stacked gate weights of one recurrent layer; gates are laid out side by side
/// along the columns (GRU: r|z|n, LSTM: i|f|g|o).
struct RecurrentLayer {
    Tensor w_input;  // [in x G*h]
    Tensor b_input;  // [1 x G*h]
    Tensor w_hidden; // [h x G*h]
    Tensor b_hidden; // [1 x G*h]
};

class GRUModel final : public RecurrentModel {
public:
    explicit GRUModel(const RNNConfig& config);

    [[nodiscard]] const RNNConfig& config() const { return config_; }
    [[nodiscard]] std::string family() const override { return "gru"; }
    [[nodiscard]] std::size_t input_dim() const override { return config_.input_dim; }
    [[nodiscard]] std::size_t output_dim() const override { return config_.output_dim; }

    void reset_state() override;
    [[nodiscard]] bool has_state() const override { return !hidden_.empty(); }
    /// r = s(x Wir + bir + h Whr + bhr), z likewise, n = tanh(x Win + bin + r*(h Whn + bhn)),
    /// h' = (1 - z) n + z h, output = h' Wout + bout.
    Tensor forward_step(const Tensor& token) override;
    [[nodiscard]] const std::vector<Tensor>& hidden() const { return hidden_; }

    [[nodiscard]] std::vector<NamedTensor> named_parameters() const override;
    [[nodiscard]] nlohmann::json config_json() const override;

    std::vector<RecurrentLayer> layers;
    Tensor out_w;
    Tensor out_b;

private:
    RNNConfig config_;
    std::vector<Tensor> hidden_;
};

class LSTMModel final : public RecurrentModel {
public:
    explicit LSTMModel(const RNNConfig& config);

    [[nodiscard]] const RNNConfig& config() const { return config_; }
    [[nodiscard]] std::string family() const override { return "lstm"; }
    [[nodiscard]] std::size_t input_dim() const override { return config_.input_dim; }
    [[nodiscard]] std::size_t output_dim() const override { return config_.output_dim; }

    void reset_state() override;
    [[nodiscard]] bool has_state() const override { return !hidden_.empty(); }
    /// c' = f*c + i*g, h' = o*tanh(c'), output = h' Wout + bout.
    Tensor forward_step(const Tensor& token) override;
    [[nodiscard]] const std::vector<Tensor>& hidden() const { return hidden_; }
    [[nodiscard]] const std::vector<Tensor>& cell() const { return cell_; }

    [[nodiscard]] std::vector<NamedTensor> named_parameters() const override;
    [[nodiscard]] nlohmann::json config_json() const override;

    std::vector<RecurrentLayer> layers;
    Tensor out_w;
    Tensor out_b;

private:
    RNNConfig config_;
    std::vector<Tensor> hidden_;
    std::vector<Tensor> cell_;
};

struct TransformerConfig {
    std::size_t d_model = 8;
    std::size_t nhead = 2;
    std::size_t num_layers = 1;
    std::size_t dim_feedforward = 29;
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    std::size_t max_len = 256;
    std::uint64_t seed = 0;

    /// Rejects d_model not divisible by nhead, among others.
    void validate() const;
};

void to_json(nlohmann::json& j, const TransformerConfig& c);
void from_json(const nlohmann::json& j, TransformerConfig& c);

struct TransformerLayer {
    Tensor w_qkv; // [d x 3d]
    Tensor b_qkv; // [1 x 3d]
    Tensor w_o;   // [d x d]
    Tensor b_o;
    Tensor norm1_gamma, norm1_beta;
    Tensor w_ff1; // [d x ff]
    Tensor b_ff1;
    Tensor w_ff2; // [ff x d]
    Tensor b_ff2;
    Tensor norm2_gamma, norm2_beta;
};

class TransformerModel final : public SequenceModel {
public:
    explicit TransformerModel(TransformerConfig config);

    [[nodiscard]] const TransformerConfig& config() const { return config_; }
    [[nodiscard]] std::string family() const override { return "transformer"; }
    [[nodiscard]] std::size_t input_dim() const override { return config_.input_dim; }
    [[nodiscard]] std::size_t output_dim() const override { return config_.output_dim; }

    /// Throws CapacityError when T > max_len.
    Tensor forward_sequence(const Tensor& tokens) override;

    [[nodiscard]] std::vector<NamedTensor> named_parameters() const override;
    [[nodiscard]] nlohmann::json config_json() const override;

    Tensor embed_w;
    Tensor embed_b;
    std::vector<TransformerLayer> layers;
    Tensor out_w;
    Tensor out_b;

private:
    TransformerConfig config_;
    Tensor positions_; // [max_len x d_model], constant
};

std::size_t count_gru_parameters(const RNNConfig& config);
std::size_t count_lstm_parameters(const RNNConfig& config);
std::size_t count_parameters(const TransformerConfig& config);
inline std::size_t count_parameters(const GRUConfig& config) { return count_gru_parameters(config); }
inline std::size_t count_parameters(const LSTMConfig& config) { return count_lstm_parameters(config); }

} // namespace est
