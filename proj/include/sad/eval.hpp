#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "sad/dataset.hpp"
#include "sad/model.hpp"

namespace sad {

enum class MetricKind {
    suboptimality_vs_horizon,
    cumulative_regret_vs_step,
    return_vs_episode,
    /// Grid offline curves: episode return against context length.
    return_vs_horizon,
};

std::string_view to_string(MetricKind k) noexcept;
MetricKind parse_metric_kind(std::string_view s);

struct MetricSeries {
    MetricKind kind = MetricKind::suboptimality_vs_horizon;
    std::vector<int> x;
    std::vector<double> mean;
    std::vector<double> std_err;
    std::string method;
    std::string family;
    std::uint64_t seed = 0;

    bool operator==(const MetricSeries&) const = default;
};

struct EvalConfig {
    int num_test_envs = 200;
    /// Offline context lengths. Empty means 0..max_context for bandits and
    /// a coarse grid for gridworlds.
    std::vector<int> horizons;
    /// Online bandit pulls.
    int online_steps = 200;
    /// Online grid episodes (K).
    int online_episodes = 40;
    /// FIFO context cap online; 0 means the model's max_context.
    int online_context_cap = 0;
    int threads = 1;

    void validate() const;
    bool operator==(const EvalConfig&) const = default;
};

/// Something that picks actions from (context, query). The model is one;
/// fixed policies serve as baselines and test stubs.
class Agent {
public:
    virtual ~Agent() = default;
    virtual ActionId act(const Environment& env, const Context& context, const StateVec& query,
                         model::PredictMode mode, RngStream& rng) const = 0;
    /// Actions for the first h transitions of `context`, for every h in
    /// horizons. The default calls act() per prefix.
    virtual std::vector<ActionId> act_prefixes(const Environment& env, const Context& context,
                                               const StateVec& query, const std::vector<int>& horizons,
                                               model::PredictMode mode, RngStream& rng) const;
    virtual int max_context() const { return 1 << 30; }
};

class ModelAgent final : public Agent {
public:
    explicit ModelAgent(const model::ModelParams<float>& params) : params_(params) {}
    ActionId act(const Environment& env, const Context& context, const StateVec& query, model::PredictMode mode,
                 RngStream& rng) const override;
    /// One forward pass: row h of the logits conditions on the first h transitions.
    std::vector<ActionId> act_prefixes(const Environment& env, const Context& context, const StateVec& query,
                                       const std::vector<int>& horizons, model::PredictMode mode,
                                       RngStream& rng) const override;
    int max_context() const override { return params_.config.max_context; }

private:
    const model::ModelParams<float>& params_;
};

/// Uniform random actions.
class RandomAgent final : public Agent {
public:
    ActionId act(const Environment& env, const Context& context, const StateVec& query, model::PredictMode mode,
                 RngStream& rng) const override;
};

/// Always an oracle-optimal action (lowest index of the optimal set).
class OracleAgent final : public Agent {
public:
    ActionId act(const Environment& env, const Context& context, const StateVec& query, model::PredictMode mode,
                 RngStream& rng) const override;
};

/// Always the same action.
class FixedAgent final : public Agent {
public:
    explicit FixedAgent(ActionId a) : a_(a) {}
    ActionId act(const Environment&, const Context&, const StateVec&, model::PredictMode, RngStream&) const override {
        return a_;
    }

private:
    ActionId a_;
};

/// Test env j is drawn from RngStream(master_seed, j) on the test split, so
/// every method sees the same instances.
EnvInstance test_env(std::string_view family, std::uint64_t master_seed, int j);

/// Bandits: greedy arm after a random context of length h, suboptimality
/// mu* - mu_a. Grids: return of one greedy episode from reset with the
/// context frozen. Contexts for different h are nested prefixes of one
/// random context per env.
MetricSeries eval_offline(const Agent& agent, std::string_view family, const EvalConfig& config,
                          std::uint64_t master_seed);

/// Context starts empty. Bandits: cumulative regret per pull. Grids: return
/// per episode with the context carried across episodes (FIFO-capped).
MetricSeries eval_online(const Agent& agent, std::string_view family, const EvalConfig& config,
                         std::uint64_t master_seed);

/// Checks that the model's shape fits the family, then evaluates it.
MetricSeries eval_offline(const model::ModelParams<float>& params, std::string_view family,
                          const EvalConfig& config, std::uint64_t master_seed);
MetricSeries eval_online(const model::ModelParams<float>& params, std::string_view family,
                         const EvalConfig& config, std::uint64_t master_seed);

/// Exact expected suboptimality of a uniform arm: max(m) - mean(m).
double random_suboptimality(const std::vector<double>& means);

/// Mean of `series.mean` over points with lo <= x <= hi.
double mean_over(const MetricSeries& series, int lo, int hi);
/// Value at x (throws if absent).
double value_at(const MetricSeries& series, int x);

/// Columns kind, x, mean, std_err, method, family, seed; optional
/// "# config_hash=..." first line.
void write_metric_csv(const std::vector<MetricSeries>& series, const std::filesystem::path& path,
                      const std::string& config_hash);
std::string metric_csv(const std::vector<MetricSeries>& series, const std::string& config_hash);
std::vector<MetricSeries> read_metric_csv(const std::filesystem::path& path);

/// Line chart with a shaded +-1 std_err band per series.
void write_metric_svg(const std::vector<MetricSeries>& series, const std::filesystem::path& path,
                      const std::string& title, const std::string& config_hash);

}  // namespace sad
