#include "sad/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>

#include "sad/error.hpp"

namespace sad {

namespace {

void check_policy(const Environment& env, const Policy& policy) {
    if (policy.num_actions() != env.spec().num_actions) {
        throw Error(Errc::invalid_argument, "policy action count differs from the environment");
    }
}

void require_kind(const Environment& env, RewardKind kind, const char* op) {
    if (env.spec().reward_kind != kind) {
        throw Error(Errc::method_env_mismatch, std::string(op) + " needs a " + std::string(to_string(kind)) +
                                                   "-reward environment, got " + env.spec().env_family);
    }
}

// Steps until the first nonzero reward, starting with `first` from s; T on failure.
int steps_to_reward(const Environment& env, const Policy& policy, const StateVec& s0, ActionId first, int T,
                    RngStream& rng) {
    StateVec s = s0;
    ActionId a = first;
    for (int k = 1; k <= T; ++k) {
        const StepResult r = env.transition(s, a, rng);
        if (r.reward > 0.0) {
            return k;
        }
        s = r.next_state;
        a = policy.sample(env.state_index(s), rng);
    }
    return T;
}

}  // namespace

Context collect_context(const Environment& env, const Policy& policy, int T, RngStream& rng) {
    check_policy(env, policy);
    Context ctx;
    ctx.transitions.reserve(static_cast<std::size_t>(std::max(T, 0)));
    for (int i = 0; i < T; ++i) {
        const StateVec s = env.sample_state_uniform(rng);
        const ActionId a = policy.sample(env.state_index(s), rng);
        const StepResult r = env.transition(s, a, rng);
        ctx.transitions.push_back(Transition{s, a, r.reward, r.next_state});
    }
    return ctx;
}

DistilledPair distill_dense(const Environment& env, const Policy& policy, int N, double gamma, RngStream& rng) {
    require_kind(env, RewardKind::dense, "distill_dense");
    check_policy(env, policy);
    if (N < 0 || N > env.spec().horizon) {
        throw Error(Errc::invalid_trust_horizon, "dense trust horizon must lie in [0, horizon], got " +
                                                     std::to_string(N));
    }
    const StateVec sq = env.sample_state_uniform(rng);
    ActionId best{0};
    double best_ret = -std::numeric_limits<double>::infinity();
    for (int a0 = 0; a0 < env.spec().num_actions; ++a0) {
        StateVec s = sq;
        ActionId a{a0};
        double ret = 0.0;
        double disc = 1.0;
        for (int t = 0; t <= N; ++t) {
            const StepResult r = env.transition(s, a, rng);
            ret += disc * r.reward;
            disc *= gamma;
            s = r.next_state;
            if (t < N) {
                a = policy.sample(env.state_index(s), rng);
            }
        }
        if (ret > best_ret) {
            best_ret = ret;
            best = ActionId{a0};
        }
    }
    return {sq, best};
}

SparseDistillResult distill_sparse(const Environment& env, const Policy& policy, int N, int T, RngStream& rng,
                                   std::int64_t max_resamples) {
    require_kind(env, RewardKind::sparse, "distill_sparse");
    check_policy(env, policy);
    if (N < 2 || N > T) {
        throw Error(Errc::invalid_trust_horizon,
                    "sparse trust horizon must satisfy 2 <= N <= T, got N=" + std::to_string(N) +
                        " T=" + std::to_string(T));
    }
    const int na = env.spec().num_actions;
    SparseDistillResult out;
    out.steps.assign(static_cast<std::size_t>(na), T);
    for (std::int64_t attempt = 0; attempt < max_resamples; ++attempt) {
        const StateVec sq = env.sample_state_uniform(rng);
        int best = 0;
        for (int a = 0; a < na; ++a) {
            out.steps[static_cast<std::size_t>(a)] = steps_to_reward(env, policy, sq, ActionId{a}, T, rng);
            if (out.steps[static_cast<std::size_t>(a)] < out.steps[static_cast<std::size_t>(best)]) {
                best = a;
            }
        }
        if (out.steps[static_cast<std::size_t>(best)] < N) {
            out.query = sq;
            out.label = ActionId{best};
            out.resamples = attempt;
            return out;
        }
    }
    throw Error(Errc::non_termination,
                "no query state reached a reward within N=" + std::to_string(N) + " after " +
                    std::to_string(max_resamples) + " resamples");
}

DistilledPair distill_bandit(const Environment& env, const Policy& policy, int N, RngStream& rng) {
    require_kind(env, RewardKind::bandit, "distill_bandit");
    check_policy(env, policy);
    if (N < 1) {
        throw Error(Errc::invalid_trust_horizon, "bandit trust horizon must be >= 1");
    }
    const auto na = static_cast<std::size_t>(env.spec().num_actions);
    const StateVec s = env.state_at(0);
    std::vector<std::int64_t> counts(na, 0);
    std::vector<double> sums(na, 0.0);
    std::size_t under = na;  // arms with count <= N
    while (under > 0) {
        const ActionId a = policy.sample(0, rng);
        const auto i = static_cast<std::size_t>(a.index);
        sums[i] += env.transition(s, a, rng).reward;
        if (++counts[i] == N + 1) {
            --under;
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < na; ++i) {
        if (sums[i] / static_cast<double>(counts[i]) > sums[best] / static_cast<double>(counts[best])) {
            best = i;
        }
    }
    return {s, ActionId{static_cast<int>(best)}};
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const std::size_t lo = n * w / workers;
            const std::size_t hi = n * (w + 1) / workers;
            try {
                for (std::size_t i = lo; i < hi; ++i) {
                    body(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (std::thread& t : pool) {
        t.join();
    }
    // lowest block first, so the reported error does not depend on timing
    for (const std::exception_ptr& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

std::vector<double> dit_weights(const std::vector<double>& rewards, double gamma, double alpha) {
    if (!(alpha > 0.0)) {
        throw Error(Errc::config_invalid, "dit_temperature must be positive");
    }
    const std::size_t n = rewards.size();
    std::vector<double> w(n);
    double ret = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        ret = rewards[k] + gamma * ret;
        w[k] = ret / alpha;
    }
    if (n == 0) {
        return w;
    }
    const double mx = *std::max_element(w.begin(), w.end());
    double z = 0.0;
    for (double& v : w) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : w) {
        v /= z;
    }
    return w;
}

namespace {

void validate(const DatagenConfig& c, const EnvSpec& spec) {
    if (c.dataset_size < 0) {
        throw Error(Errc::config_invalid, "dataset_size must be >= 0");
    }
    if (c.context_len < 0) {
        throw Error(Errc::config_invalid, "context_len must be >= 0");
    }
    if (!(c.gamma > 0.0 && c.gamma <= 1.0)) {
        throw Error(Errc::config_invalid, "gamma must lie in (0, 1]");
    }
    if (c.max_resamples < 1) {
        throw Error(Errc::config_invalid, "max_resamples must be >= 1");
    }
    if (c.method == Method::SAD && spec.reward_kind == RewardKind::sparse &&
        (c.trust_horizon < 2 || c.trust_horizon > spec.horizon)) {
        throw Error(Errc::invalid_trust_horizon, "sparse trust horizon must satisfy 2 <= N <= " +
                                                     std::to_string(spec.horizon));
    }
}

Dataset empty_dataset(std::string_view family, Split split, const DatagenConfig& config, std::uint64_t seed) {
    Dataset d;
    d.config = config;
    d.env_spec = family_spec(family);
    d.split = split;
    d.master_seed = seed;
    d.samples.resize(static_cast<std::size_t>(config.dataset_size));
    return d;
}

// Episodic history under the policy: `episodes` resets for grids, one run of
// `pulls` steps for bandits.
std::vector<Transition> rollout_history(Environment& env, const Policy& policy, int episodes, int pulls,
                                        RngStream& rng) {
    std::vector<Transition> h;
    const bool bandit = env.spec().reward_kind == RewardKind::bandit;
    const int runs = bandit ? 1 : episodes;
    const int len = bandit ? pulls : env.spec().horizon;
    for (int e = 0; e < runs; ++e) {
        StateVec s = env.reset();
        for (int t = 0; t < len; ++t) {
            const ActionId a = policy.sample(env.state_index(s), rng);
            const StepResult r = env.step(a, rng);
            h.push_back(Transition{s, a, r.reward, r.next_state});
            s = r.next_state;
        }
    }
    return h;
}

Context window_before(const std::vector<Transition>& h, std::size_t t, int context_len) {
    const std::size_t lo = t > static_cast<std::size_t>(context_len) ? t - static_cast<std::size_t>(context_len) : 0;
    Context c;
    c.transitions.assign(h.begin() + static_cast<std::ptrdiff_t>(lo), h.begin() + static_cast<std::ptrdiff_t>(t));
    return c;
}

}  // namespace

Dataset build_dataset(std::string_view family, Split split, const DatagenConfig& config, std::uint64_t master_seed,
                      int threads) {
    if (config.method != Method::SAD) {
        throw Error(Errc::config_invalid, "build_dataset generates SAD data only");
    }
    Dataset d = empty_dataset(family, split, config, master_seed);
    validate(config, d.env_spec);
    const Policy policy = Policy::uniform(d.env_spec.num_actions);
    parallel_for(d.samples.size(), threads, [&](std::size_t i) {
        const RngStream base(master_seed, i);
        RngStream env_rng = base.child(0);
        RngStream ctx_rng = base.child(1);
        RngStream label_rng = base.child(2);
        const EnvInstance env = sample_env(family, split, env_rng);
        PretrainSample& s = d.samples[i];
        s.context = collect_context(*env, policy, config.context_len, ctx_rng);
        switch (env->spec().reward_kind) {
            case RewardKind::dense: {
                const DistilledPair p = distill_dense(*env, policy, config.trust_horizon, config.gamma, label_rng);
                s.query_state = p.query;
                s.action_label = p.label;
                break;
            }
            case RewardKind::sparse: {
                const SparseDistillResult p = distill_sparse(*env, policy, config.trust_horizon, env->spec().horizon,
                                                             label_rng, config.max_resamples);
                s.query_state = p.query;
                s.action_label = p.label;
                break;
            }
            case RewardKind::bandit: {
                const DistilledPair p = distill_bandit(*env, policy, config.trust_horizon, label_rng);
                s.query_state = p.query;
                s.action_label = p.label;
                break;
            }
        }
        s.env_tag = env->tag();
        s.method = Method::SAD;
        s.seed = i;
    });
    return d;
}

Dataset build_baseline_dataset(Method method, std::string_view family, Split split, const DatagenConfig& config,
                               std::uint64_t master_seed, int threads) {
    if (method == Method::SAD) {
        throw Error(Errc::invalid_argument, "SAD is not a baseline method");
    }
    DatagenConfig cfg = config;
    cfg.method = method;
    Dataset d = empty_dataset(family, split, cfg, master_seed);
    validate(cfg, d.env_spec);
    const EnvSpec& spec = d.env_spec;
    const Policy policy = Policy::uniform(spec.num_actions);
    const bool bandit = spec.reward_kind == RewardKind::bandit;

    if (method == Method::DPT_random) {
        parallel_for(d.samples.size(), threads, [&](std::size_t i) {
            const RngStream base(master_seed, i);
            RngStream env_rng = base.child(0);
            RngStream ctx_rng = base.child(1);
            RngStream label_rng = base.child(2);
            const EnvInstance env = sample_env(family, split, env_rng);
            PretrainSample& s = d.samples[i];
            s.context = collect_context(*env, policy, cfg.context_len, ctx_rng);
            s.query_state = env->sample_state_uniform(label_rng);
            s.action_label = policy.sample(env->state_index(s.query_state), label_rng);
            s.env_tag = env->tag();
            s.method = method;
            s.seed = i;
        });
        return d;
    }

    // AD and DIT emit one sample per step of a history; history g owns
    // samples [g*L, (g+1)*L) and the stream (master_seed, g).
    std::size_t len = 0;
    if (method == Method::AD) {
        if (cfg.ad_episodes < 1) {
            throw Error(Errc::config_invalid, "ad_episodes must be >= 1");
        }
        len = bandit ? static_cast<std::size_t>(cfg.context_len)
                     : static_cast<std::size_t>(cfg.ad_episodes) * static_cast<std::size_t>(spec.horizon);
    } else {
        if (!bandit && spec.horizon > cfg.context_len) {
            throw Error(Errc::method_env_mismatch, "DIT needs a whole episode to fit the context: horizon " +
                                                       std::to_string(spec.horizon) + " > context_len " +
                                                       std::to_string(cfg.context_len));
        }
        len = bandit ? static_cast<std::size_t>(cfg.context_len) : static_cast<std::size_t>(spec.horizon);
    }
    if (len == 0) {
        if (d.samples.empty()) {
            return d;
        }
        throw Error(Errc::method_env_mismatch, std::string(to_string(method)) + " history is empty");
    }
    const std::size_t groups = (d.samples.size() + len - 1) / len;
    parallel_for(groups, threads, [&](std::size_t g) {
        const RngStream base(master_seed, g);
        RngStream env_rng = base.child(0);
        RngStream roll_rng = base.child(1);
        const EnvInstance env = sample_env(family, split, env_rng);
        const std::vector<Transition> h =
            rollout_history(*env, policy, method == Method::AD ? cfg.ad_episodes : 1, static_cast<int>(len), roll_rng);
        std::vector<double> weights;
        if (method == Method::DIT) {
            std::vector<double> rewards;
            rewards.reserve(h.size());
            for (const Transition& t : h) {
                rewards.push_back(t.reward);
            }
            // bandit pulls are one-step episodes, so the return is the reward itself
            weights = dit_weights(rewards, bandit ? 0.0 : cfg.gamma, cfg.dit_temperature);
        }
        const std::string tag = env->tag();
        for (std::size_t t = 0; t < len; ++t) {
            const std::size_t i = g * len + t;
            if (i >= d.samples.size()) {
                break;
            }
            PretrainSample& s = d.samples[i];
            s.context = window_before(h, t, cfg.context_len);
            s.query_state = h[t].state;
            s.action_label = h[t].action;
            s.weight = method == Method::DIT ? weights[t] : 1.0;
            s.env_tag = tag;
            s.method = method;
            s.seed = g;
        }
    });
    return d;
}

Dataset generate_dataset(std::string_view family, Split split, const DatagenConfig& config,
                         std::uint64_t master_seed, int threads) {
    if (config.method == Method::SAD) {
        return build_dataset(family, split, config, master_seed, threads);
    }
    return build_baseline_dataset(config.method, family, split, config, master_seed, threads);
}

}  // namespace sad
