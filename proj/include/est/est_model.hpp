#pragma once

// Echo state transformer: input embedding, then per layer previous-state
// attention -> working memory -> memory self-attention -> feed-forward, then a
// linear output head. The only recurrent state is the per-layer working memory,
// so the cost of a step does not depend on how many steps came before it.

#include "est/attention.hpp"
#include "est/reservoir.hpp"
#include "est/sequence_model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace est {

struct ESTConfig {
    std::size_t memory_units = 2;  // M
    std::size_t memory_dim = 13;   // d_m
    std::size_t attention_dim = 6; // d_a
    std::size_t num_layers = 1;
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    double connectivity = default_connectivity;
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

void to_json(nlohmann::json& j, const ESTConfig& c);
void from_json(const nlohmann::json& j, ESTConfig& c);

struct ESTLayer {
    std::vector<AttentionHead> state_heads; // one per memory unit, d_a -> d_a queries, d_m -> keys/values
    std::vector<ReservoirUnit> units;
    AttentionHead self_head;                // d_m -> d_a keys/queries, d_m -> d_m values
    Tensor reduce;                          // [(M*d_m) x d_a]
    FeedForward ff;                         // width d_a
};

class ESTModel final : public RecurrentModel {
public:
    explicit ESTModel(ESTConfig config);

    [[nodiscard]] const ESTConfig& config() const { return config_; }
    [[nodiscard]] std::string family() const override { return "est"; }
    [[nodiscard]] std::size_t input_dim() const override { return config_.input_dim; }
    [[nodiscard]] std::size_t output_dim() const override { return config_.output_dim; }

    void reset_state() override;
    [[nodiscard]] bool has_state() const override { return !memory_.empty(); }
    Tensor forward_step(const Tensor& token) override;

    /// Working memory of each layer after the last step.
    [[nodiscard]] const std::vector<WorkingMemoryState>& memory() const { return memory_; }
    /// Replaces the memory with value copies so it no longer references a tape.
    void detach_memory();

    [[nodiscard]] std::vector<NamedTensor> named_parameters() const override;
    [[nodiscard]] std::vector<NamedTensor> named_buffers() const override;
    [[nodiscard]] nlohmann::json config_json() const override;

    Tensor embed_w; // [input_dim x d_a]
    Tensor embed_b; // [1 x d_a]
    std::vector<ESTLayer> layers;
    Tensor out_w;   // [d_a x output_dim]
    Tensor out_b;   // [1 x output_dim]

private:
    ESTConfig config_;
    std::vector<WorkingMemoryState> memory_;
};

/// Closed-form count of trainable scalars (w_hat excluded).
std::size_t count_parameters(const ESTConfig& config);

struct ParameterBlock {
    std::string name; // "embed", "state_attention", "memory", "self_attention", "ff", "out"
    std::size_t count = 0;
};
/// Trainable scalars per block, summed over layers, without building the model.
std::vector<ParameterBlock> parameter_blocks(const ESTConfig& config);

} // namespace est
