#include "sad/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sad/error.hpp"

namespace sad::model {

void ModelConfig::validate() const {
    if (n_layers < 1 || n_heads < 1 || d_embed < 1) {
        throw Error(Errc::config_invalid, "n_layers, n_heads and d_embed must be positive");
    }
    if (head_dim() < 1) {
        throw Error(Errc::config_invalid, "d_embed smaller than n_heads");
    }
    if (max_context < 0 || state_dim < 1 || num_actions < 1) {
        throw Error(Errc::config_invalid, "invalid model shape");
    }
    if (state_scale.size() != static_cast<std::size_t>(state_dim)) {
        throw Error(Errc::config_invalid, "state_scale length must equal state_dim");
    }
}

ModelConfig make_model_config(const EnvSpec& spec, int max_context) {
    ModelConfig c;
    c.max_context = max_context;
    c.state_dim = spec.state_dim;
    c.num_actions = spec.num_actions;
    c.state_scale = spec.state_scale;
    if (c.state_scale.empty()) {
        c.state_scale.assign(static_cast<std::size_t>(spec.state_dim), 1.0);
    }
    return c;
}

// ---------------------------------------------------------------- params

template <typename T>
std::size_t ModelParams<T>::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].name == name) {
            return i;
        }
    }
    throw Error(Errc::invalid_argument, "no parameter named '" + name + "'");
}

template <typename T>
const ad::Tensor<T>& ModelParams<T>::at(const std::string& name) const {
    return tensors[index_of(name)].tensor;
}

template <typename T>
ad::Tensor<T>& ModelParams<T>::at(const std::string& name) {
    return tensors[index_of(name)].tensor;
}

template <typename T>
std::size_t ModelParams<T>::num_scalars() const {
    std::size_t n = 0;
    for (const auto& nt : tensors) {
        n += nt.tensor.size();
    }
    return n;
}

namespace {

constexpr double kPosInitStd = 0.02;
constexpr double kLnEps = 1e-5;
// Per-block tensors, in table order.
constexpr int kPerLayer = 12;
// Tensors before the first block: embed.w, embed.b, pos.
constexpr int kPrefix = 3;

enum LayerSlot : int {
    kLn1G, kLn1B, kQkvW, kQkvB, kOutW, kOutB, kLn2G, kLn2B, kMlpW1, kMlpB1, kMlpW2, kMlpB2
};

std::size_t layer_slot(int layer, LayerSlot slot) {
    return static_cast<std::size_t>(kPrefix + layer * kPerLayer + slot);
}

}  // namespace

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams<T> p;
    p.config = config;
    RngStream rng(seed, 0x1417);
    const auto d = static_cast<std::size_t>(config.d_embed);
    const auto attn = static_cast<std::size_t>(config.attn_dim());
    const auto mlp = static_cast<std::size_t>(config.mlp_dim());
    auto normal = [&](std::vector<std::size_t> shape, double std) {
        ad::Tensor<T> t(std::move(shape));
        for (T& v : t.values()) {
            v = static_cast<T>(rng.normal(0.0, std));
        }
        return t;
    };
    // Matrices are scaled by fan-in. At 0.02 the attention logits start so
    // close to zero that sparse-reward retrieval sits on a long plateau.
    auto matrix = [&](std::size_t rows, std::size_t cols) {
        return normal({rows, cols}, 1.0 / std::sqrt(static_cast<double>(rows)));
    };
    auto constant = [](std::vector<std::size_t> shape, T v) { return ad::Tensor<T>(std::move(shape), v); };

    p.tensors.push_back({"embed.w", matrix(static_cast<std::size_t>(config.token_dim()), d)});
    p.tensors.push_back({"embed.b", constant({d}, T{0})});
    p.tensors.push_back({"pos", normal({static_cast<std::size_t>(config.max_context) + 1, d}, kPosInitStd)});
    for (int l = 0; l < config.n_layers; ++l) {
        const std::string h = "h" + std::to_string(l) + ".";
        p.tensors.push_back({h + "ln1.g", constant({d}, T{1})});
        p.tensors.push_back({h + "ln1.b", constant({d}, T{0})});
        p.tensors.push_back({h + "attn.wqkv", matrix(d, 3 * attn)});
        p.tensors.push_back({h + "attn.bqkv", constant({3 * attn}, T{0})});
        p.tensors.push_back({h + "attn.wo", matrix(attn, d)});
        p.tensors.push_back({h + "attn.bo", constant({d}, T{0})});
        p.tensors.push_back({h + "ln2.g", constant({d}, T{1})});
        p.tensors.push_back({h + "ln2.b", constant({d}, T{0})});
        p.tensors.push_back({h + "mlp.w1", matrix(d, mlp)});
        p.tensors.push_back({h + "mlp.b1", constant({mlp}, T{0})});
        p.tensors.push_back({h + "mlp.w2", matrix(mlp, d)});
        p.tensors.push_back({h + "mlp.b2", constant({d}, T{0})});
    }
    p.tensors.push_back({"lnf.g", constant({d}, T{1})});
    p.tensors.push_back({"lnf.b", constant({d}, T{0})});
    p.tensors.push_back({"head.w", constant({d, static_cast<std::size_t>(config.num_actions)}, T{0})});
    p.tensors.push_back({"head.b", constant({static_cast<std::size_t>(config.num_actions)}, T{0})});
    return p;
}

template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& params) {
    ModelParams<T> out;
    out.config = params.config;
    out.tensors.reserve(params.tensors.size());
    for (const auto& nt : params.tensors) {
        out.tensors.push_back({nt.name, ad::Tensor<T>(nt.tensor.shape(), T{0})});
    }
    return out;
}

// ---------------------------------------------------------------- tokens

template <typename T>
ad::Tensor<T> tokenize(const ModelConfig& config, const Context& context, const StateVec& query) {
    if (static_cast<int>(context.size()) > config.max_context) {
        throw Error(Errc::context_too_long, std::to_string(context.size()) + " > " +
                                                std::to_string(config.max_context));
    }
    const auto sd = static_cast<std::size_t>(config.state_dim);
    if (query.size() != sd) {
        throw Error(Errc::shape_mismatch, "query state has wrong length");
    }
    const auto width = static_cast<std::size_t>(config.token_dim());
    ad::Tensor<T> tokens = ad::Tensor<T>::matrix(context.size() + 1, width);
    for (std::size_t i = 0; i < sd; ++i) {
        tokens(0, i) = static_cast<T>(query[i] / config.state_scale[i]);
    }
    const auto na = static_cast<std::size_t>(config.num_actions);
    for (std::size_t r = 0; r < context.size(); ++r) {
        const Transition& t = context.transitions[r];
        if (t.state.size() != sd || t.next_state.size() != sd) {
            throw Error(Errc::shape_mismatch, "context state has wrong length");
        }
        if (t.action.index < 0 || static_cast<std::size_t>(t.action.index) >= na) {
            throw Error(Errc::invalid_action, "context action out of range");
        }
        const std::size_t row = r + 1;
        for (std::size_t i = 0; i < sd; ++i) {
            tokens(row, i) = static_cast<T>(t.state[i] / config.state_scale[i]);
            tokens(row, sd + na + 1 + i) = static_cast<T>(t.next_state[i] / config.state_scale[i]);
        }
        tokens(row, sd + static_cast<std::size_t>(t.action.index)) = T{1};
        tokens(row, sd + na) = static_cast<T>(t.reward);
    }
    return tokens;
}

// ---------------------------------------------------------------- forward

template <typename T>
ad::Var<T> forward_graph(ad::Tape<T>& tape, const ModelParams<T>& params, std::span<const ad::Var<T>> leaves,
                         const ad::Tensor<T>& tokens) {
    const ModelConfig& c = params.config;
    const std::size_t expected = static_cast<std::size_t>(kPrefix + kPerLayer * c.n_layers + 4);
    if (leaves.size() != expected || params.tensors.size() != expected) {
        throw Error(Errc::shape_mismatch, "parameter table does not match config");
    }
    const std::size_t len = tokens.rows();
    if (len > static_cast<std::size_t>(c.max_context) + 1) {
        throw Error(Errc::context_too_long, "sequence longer than max_context + 1");
    }
    const T eps = static_cast<T>(kLnEps);
    const auto hd = static_cast<std::size_t>(c.head_dim());
    const auto attn = static_cast<std::size_t>(c.attn_dim());
    const T att_scale = T{1} / std::sqrt(static_cast<T>(hd));

    auto x_in = tape.leaf_ref(tokens, false);
    std::vector<int> positions(len);
    std::iota(positions.begin(), positions.end(), 0);
    auto h = ad::add(ad::add_row(ad::matmul(x_in, leaves[0]), leaves[1]),
                     ad::gather_rows(leaves[2], std::span<const int>(positions)));

    for (int l = 0; l < c.n_layers; ++l) {
        auto p = [&](LayerSlot s) { return leaves[layer_slot(l, s)]; };
        auto a = ad::layernorm(h, p(kLn1G), p(kLn1B), eps);
        auto qkv = ad::add_row(ad::matmul(a, p(kQkvW)), p(kQkvB));
        std::vector<ad::Var<T>> heads;
        heads.reserve(static_cast<std::size_t>(c.n_heads));
        for (int k = 0; k < c.n_heads; ++k) {
            const std::size_t off = static_cast<std::size_t>(k) * hd;
            auto q = ad::slice_cols(qkv, off, hd);
            auto kk = ad::slice_cols(qkv, attn + off, hd);
            auto v = ad::slice_cols(qkv, 2 * attn + off, hd);
            auto scores = ad::scale(ad::matmul_nt(q, kk), att_scale);
            auto probs = ad::causal_softmax_rows(scores);
            heads.push_back(ad::matmul(probs, v));
        }
        auto merged = heads.size() == 1 ? heads[0] : ad::concat_cols(std::span<const ad::Var<T>>(heads));
        h = ad::add(h, ad::add_row(ad::matmul(merged, p(kOutW)), p(kOutB)));
        auto m = ad::layernorm(h, p(kLn2G), p(kLn2B), eps);
        m = ad::gelu(ad::add_row(ad::matmul(m, p(kMlpW1)), p(kMlpB1)));
        h = ad::add(h, ad::add_row(ad::matmul(m, p(kMlpW2)), p(kMlpB2)));
    }
    const std::size_t tail = expected - 4;
    h = ad::layernorm(h, leaves[tail], leaves[tail + 1], eps);
    return ad::add_row(ad::matmul(h, leaves[tail + 2]), leaves[tail + 3]);
}

template <typename T>
ad::Tensor<T> forward(const ModelParams<T>& params, const Context& context, const StateVec& query) {
    const ad::Tensor<T> tokens = tokenize<T>(params.config, context, query);
    ad::Tape<T> tape;
    tape.set_grad_enabled(false);
    std::vector<ad::Var<T>> leaves;
    leaves.reserve(params.tensors.size());
    for (const auto& nt : params.tensors) {
        leaves.push_back(tape.leaf_ref(nt.tensor, false));
    }
    return forward_graph(tape, params, std::span<const ad::Var<T>>(leaves), tokens).value();
}

template <typename T>
double loss(const ad::Tensor<T>& logits, ActionId label, double weight) {
    const std::size_t n = logits.rows();
    const std::size_t m = logits.cols();
    if (label.index < 0 || static_cast<std::size_t>(label.index) >= m) {
        throw Error(Errc::invalid_action, "label out of range");
    }
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        double mx = logits(r, 0);
        for (std::size_t c = 1; c < m; ++c) {
            mx = std::max(mx, static_cast<double>(logits(r, c)));
        }
        double z = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            z += std::exp(static_cast<double>(logits(r, c)) - mx);
        }
        total += mx + std::log(z) - static_cast<double>(logits(r, static_cast<std::size_t>(label.index)));
    }
    return weight * total / static_cast<double>(n);
}

template <typename T>
double loss_and_grad(const ModelParams<T>& params, const PretrainSample& sample, ModelParams<T>& grads) {
    if (grads.tensors.size() != params.tensors.size()) {
        throw Error(Errc::shape_mismatch, "gradient table does not match parameters");
    }
    const ad::Tensor<T> tokens = tokenize<T>(params.config, sample.context, sample.query_state);
    ad::Tape<T> tape;
    const bool needs_grad = sample.weight != 0.0;
    tape.set_grad_enabled(needs_grad);
    std::vector<ad::Var<T>> leaves;
    leaves.reserve(params.tensors.size());
    for (const auto& nt : params.tensors) {
        leaves.push_back(tape.leaf_ref(nt.tensor, needs_grad));
    }
    auto logits = forward_graph(tape, params, std::span<const ad::Var<T>>(leaves), tokens);
    auto l = ad::cross_entropy_rows(logits, sample.action_label.index, static_cast<T>(sample.weight));
    if (!needs_grad) {
        return static_cast<double>(l.value()[0]);
    }
    tape.backward(l);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const ad::Tensor<T>& g = tape.grad(leaves[i].id);
        ad::Tensor<T>& dst = grads.tensors[i].tensor;
        for (std::size_t k = 0; k < g.size(); ++k) {
            dst[k] += g[k];
        }
    }
    return static_cast<double>(l.value()[0]);
}

template <typename T>
ActionId choose_action(std::span<const T> logits_row, PredictMode mode, RngStream& rng) {
    if (logits_row.empty()) {
        throw Error(Errc::shape_mismatch, "empty logits row");
    }
    if (mode == PredictMode::greedy) {
        // first maximum wins ties
        const auto it = std::max_element(logits_row.begin(), logits_row.end());
        return ActionId{static_cast<int>(it - logits_row.begin())};
    }
    const double mx = static_cast<double>(*std::max_element(logits_row.begin(), logits_row.end()));
    std::vector<double> probs(logits_row.size());
    double z = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        probs[i] = std::exp(static_cast<double>(logits_row[i]) - mx);
        z += probs[i];
    }
    const double u = rng.uniform() * z;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) {
            return ActionId{static_cast<int>(i)};
        }
    }
    return ActionId{static_cast<int>(probs.size() - 1)};
}

template <typename T>
ActionId predict(const ModelParams<T>& params, const Context& context, const StateVec& query, PredictMode mode,
                 RngStream& rng) {
    const ad::Tensor<T> logits = forward(params, context, query);
    const std::size_t last = logits.rows() - 1;
    return choose_action<T>(std::span<const T>(logits.data() + last * logits.cols(), logits.cols()), mode, rng);
}

#define SAD_INSTANTIATE_MODEL(T)                                                                        \
    template struct ModelParams<T>;                                                                     \
    template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                          \
    template ModelParams<T> zeros_like<T>(const ModelParams<T>&);                                       \
    template ad::Tensor<T> tokenize<T>(const ModelConfig&, const Context&, const StateVec&);            \
    template ad::Var<T> forward_graph<T>(ad::Tape<T>&, const ModelParams<T>&,                           \
                                         std::span<const ad::Var<T>>, const ad::Tensor<T>&);            \
    template ad::Tensor<T> forward<T>(const ModelParams<T>&, const Context&, const StateVec&);          \
    template double loss<T>(const ad::Tensor<T>&, ActionId, double);                                    \
    template double loss_and_grad<T>(const ModelParams<T>&, const PretrainSample&, ModelParams<T>&);    \
    template ActionId choose_action<T>(std::span<const T>, PredictMode, RngStream&);                    \
    template ActionId predict<T>(const ModelParams<T>&, const Context&, const StateVec&, PredictMode,   \
                                 RngStream&);

SAD_INSTANTIATE_MODEL(float)
SAD_INSTANTIATE_MODEL(double)

#undef SAD_INSTANTIATE_MODEL

}  // namespace sad::model
