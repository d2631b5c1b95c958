#include "est/sequence_model.hpp"

#include "est/ops.hpp"

#include <fmt/format.h>

namespace est {

std::vector<Tensor> SequenceModel::parameters() const {
    std::vector<Tensor> out;
    for (auto& p : named_parameters()) {
        out.push_back(p.tensor);
    }
    return out;
}

std::size_t SequenceModel::count_parameters() const {
    std::size_t n = 0;
    for (const auto& p : named_parameters()) {
        n += p.tensor.size();
    }
    return n;
}

Tensor RecurrentModel::forward_sequence(const Tensor& tokens) {
    if (tokens.rows() == 0) {
        throw UsageError("forward_sequence: empty sequence");
    }
    if (tokens.cols() != input_dim()) {
        throw DimensionError(fmt::format("forward_sequence: tokens {} but model expects {} input channels",
                                         to_string(tokens.shape()), input_dim()));
    }
    reset_state();
    std::vector<Tensor> outputs;
    outputs.reserve(tokens.rows());
    for (std::size_t t = 0; t < tokens.rows(); ++t) {
        outputs.push_back(forward_step(slice_rows(tokens, t, 1)));
    }
    return concat_rows(outputs);
}

} // namespace est
