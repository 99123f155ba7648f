#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>

#include "sad/dataset.hpp"
#include "sad/env.hpp"

namespace sad {

struct DistilledPair {
    StateVec query;
    ActionId label;
};

/// Extra bookkeeping from the sparse distiller.
struct SparseDistillResult {
    StateVec query;
    ActionId label;
    /// Steps-to-first-reward per action; failures record T.
    std::vector<int> steps;
    std::int64_t resamples = 0;
};

/// T transitions, each from a uniformly drawn state: a ~ policy, then the
/// action is executed from that state. The env clock is left untouched.
Context collect_context(const Environment& env, const Policy& policy, int T, RngStream& rng);

/// Dense rewards: for each action one rollout of N+1 rewards starting with
/// that action and following policy; label = argmax of the discounted sum.
DistilledPair distill_dense(const Environment& env, const Policy& policy, int N, double gamma, RngStream& rng);

/// Sparse rewards: resample s_q until some action reaches a reward in fewer
/// than N steps; label = the fastest action. Requires 2 <= N <= T.
SparseDistillResult distill_sparse(const Environment& env, const Policy& policy, int N, int T, RngStream& rng,
                                   std::int64_t max_resamples = 1'000'000);

/// Bandits: pull under policy until every arm has more than N pulls; label =
/// arm with the best empirical mean.
DistilledPair distill_bandit(const Environment& env, const Policy& policy, int N, RngStream& rng);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work is split
/// into contiguous blocks; callers write results by index.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

/// SAD dataset. Sample i draws everything from RngStream(master_seed, i).
Dataset build_dataset(std::string_view family, Split split, const DatagenConfig& config, std::uint64_t master_seed,
                      int threads = 1);

/// AD, DPT_random or DIT dataset under the uniform policy.
Dataset build_baseline_dataset(Method method, std::string_view family, Split split, const DatagenConfig& config,
                               std::uint64_t master_seed, int threads = 1);

/// Dispatches on config.method.
Dataset generate_dataset(std::string_view family, Split split, const DatagenConfig& config,
                         std::uint64_t master_seed, int threads = 1);

/// exp(R_t / alpha) normalized over the episode, with R_t the discounted
/// return-to-go of `rewards`.
std::vector<double> dit_weights(const std::vector<double>& rewards, double gamma, double alpha);

}  // namespace sad
