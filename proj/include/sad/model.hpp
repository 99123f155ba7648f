#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sad/autodiff.hpp"
#include "sad/dataset.hpp"
#include "sad/env.hpp"
#include "sad/rng.hpp"

namespace sad::model {

/// Decoder-only transformer shape. Per-head width is d_embed / n_heads
/// (floored); the concatenated heads are projected back to d_embed.
struct ModelConfig {
    int n_layers = 3;
    int n_heads = 3;
    int d_embed = 32;
    int max_context = 100;
    int state_dim = 1;
    int num_actions = 5;
    std::vector<double> state_scale{1.0};

    int head_dim() const noexcept { return d_embed / n_heads; }
    int attn_dim() const noexcept { return head_dim() * n_heads; }
    int mlp_dim() const noexcept { return 4 * d_embed; }
    /// [s, one-hot(a), r, s']
    int token_dim() const noexcept { return 2 * state_dim + num_actions + 1; }

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

ModelConfig make_model_config(const EnvSpec& spec, int max_context);

template <typename T>
struct NamedTensor {
    std::string name;
    ad::Tensor<T> tensor;
};

template <typename T>
struct ModelParams {
    ModelConfig config;
    std::vector<NamedTensor<T>> tensors;

    const ad::Tensor<T>& at(const std::string& name) const;
    ad::Tensor<T>& at(const std::string& name);
    std::size_t index_of(const std::string& name) const;
    std::size_t num_scalars() const;

    template <typename U>
    ModelParams<U> cast() const {
        ModelParams<U> out;
        out.config = config;
        for (const auto& nt : tensors) {
            out.tensors.push_back({nt.name, nt.tensor.template cast<U>()});
        }
        return out;
    }
};

/// Weight matrices ~ N(0, 1/fan_in), positions ~ N(0, 0.02), zero biases,
/// unit LayerNorm gains.
/// The action head starts at zero so an untrained model is uniform.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed);

/// Zero-filled table with the same names and shapes, used for gradients.
template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& params);

/// Rows: [query, t_1, ..., t_L]. The query row holds s_q in the state slot
/// and zeros elsewhere. States are divided by config.state_scale.
template <typename T>
ad::Tensor<T> tokenize(const ModelConfig& config, const Context& context, const StateVec& query);

/// Records the forward pass on a tape; `leaves` are the parameter vars in
/// table order. Returns logits of shape (L+1) x num_actions.
template <typename T>
ad::Var<T> forward_graph(ad::Tape<T>& tape, const ModelParams<T>& params, std::span<const ad::Var<T>> leaves,
                         const ad::Tensor<T>& tokens);

/// Row j holds action logits given s_q and the first j transitions.
template <typename T>
ad::Tensor<T> forward(const ModelParams<T>& params, const Context& context, const StateVec& query);

/// weight * mean over rows of -log softmax(row)[label].
template <typename T>
double loss(const ad::Tensor<T>& logits, ActionId label, double weight);

/// Loss of one sample; gradients are added into grads (same layout as params).
template <typename T>
double loss_and_grad(const ModelParams<T>& params, const PretrainSample& sample, ModelParams<T>& grads);

enum class PredictMode { greedy, sample };

/// Acts from the last logits row (ties to the lowest index in greedy mode).
template <typename T>
ActionId predict(const ModelParams<T>& params, const Context& context, const StateVec& query, PredictMode mode,
                 RngStream& rng);

/// Action choice from a single logits row.
template <typename T>
ActionId choose_action(std::span<const T> logits_row, PredictMode mode, RngStream& rng);

}  // namespace sad::model
