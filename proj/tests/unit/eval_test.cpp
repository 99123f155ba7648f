#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "sad/envs.hpp"
#include "sad/error.hpp"
#include "sad/eval.hpp"

using namespace sad;

namespace {

// Picks the lowest-mean arm, so per-step regret is max - min.
class WorstArmAgent final : public Agent {
public:
    ActionId act(const Environment& env, const Context&, const StateVec&, model::PredictMode,
                 RngStream&) const override {
        const auto& m = dynamic_cast<const BanditEnv&>(env).means();
        return {static_cast<int>(std::min_element(m.begin(), m.end()) - m.begin())};
    }
};

EvalConfig small_config() {
    EvalConfig c;
    c.num_test_envs = 30;
    c.horizons = {0, 5, 20};
    c.online_steps = 25;
    c.online_episodes = 3;
    return c;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("sad_eval_" + name);
}

}  // namespace

TEST(Eval, RandomSuboptimalityIsExact) {
    EXPECT_DOUBLE_EQ(random_suboptimality({0.1, 0.5, 0.9}), 0.4);
    EXPECT_DOUBLE_EQ(random_suboptimality({0.3, 0.3}), 0.0);
}

TEST(Eval, OracleStubHasZeroSuboptimality) {
    const MetricSeries off = eval_offline(OracleAgent(), "gaussian_bandit", small_config(), 1);
    EXPECT_EQ(off.kind, MetricKind::suboptimality_vs_horizon);
    EXPECT_EQ(off.x, (std::vector<int>{0, 5, 20}));
    for (double v : off.mean) {
        EXPECT_EQ(v, 0.0);
    }
    const MetricSeries on = eval_online(OracleAgent(), "bernoulli_bandit", small_config(), 1);
    EXPECT_EQ(on.kind, MetricKind::cumulative_regret_vs_step);
    EXPECT_EQ(on.x.size(), 25u);
    EXPECT_EQ(on.mean.back(), 0.0);
}

TEST(Eval, RandomStubMatchesExactExpectation) {
    EvalConfig c = small_config();
    c.num_test_envs = 400;
    c.horizons = {0};
    const MetricSeries off = eval_offline(RandomAgent(), "gaussian_bandit", c, 2);
    double exact = 0.0;
    for (int j = 0; j < c.num_test_envs; ++j) {
        const EnvInstance env = test_env("gaussian_bandit", 2, j);
        exact += random_suboptimality(dynamic_cast<const BanditEnv&>(*env).means());
    }
    exact /= c.num_test_envs;
    EXPECT_NEAR(off.mean[0], exact, 4.0 * off.std_err[0]);
}

TEST(Eval, WorstArmRegretIsLinear) {
    const EvalConfig c = small_config();
    const MetricSeries on = eval_online(WorstArmAgent(), "gaussian_bandit", c, 3);
    double gap = 0.0;
    for (int j = 0; j < c.num_test_envs; ++j) {
        const EnvInstance env = test_env("gaussian_bandit", 3, j);
        const auto& m = dynamic_cast<const BanditEnv&>(*env).means();
        gap += *std::max_element(m.begin(), m.end()) - *std::min_element(m.begin(), m.end());
    }
    gap /= c.num_test_envs;
    for (std::size_t t = 0; t < on.x.size(); ++t) {
        EXPECT_NEAR(on.mean[t], static_cast<double>(t + 1) * gap, 1e-9);
    }
}

TEST(Eval, GridOracleReturn) {
    EvalConfig c = small_config();
    c.horizons = {0, 10};
    const MetricSeries off = eval_offline(OracleAgent(), "darkroom", c, 4);
    EXPECT_EQ(off.kind, MetricKind::return_vs_horizon);
    double want = 0.0;
    for (int j = 0; j < c.num_test_envs; ++j) {
        const EnvInstance env = test_env("darkroom", 4, j);
        const auto& g = dynamic_cast<const GridEnv&>(*env);
        const int d = manhattan(g.start_cell(), g.params().goal);
        // reward on arrival and on every later step at the goal
        want += d == 0 ? 49.0 : 50.0 - d;
    }
    want /= c.num_test_envs;
    EXPECT_NEAR(off.mean[0], want, 1e-9);
    EXPECT_NEAR(off.mean[1], want, 1e-9);
    const MetricSeries rnd = eval_online(RandomAgent(), "darkroom", c, 4);
    EXPECT_EQ(rnd.kind, MetricKind::return_vs_episode);
    EXPECT_LT(mean_over(rnd, 1, 3), want);
}

TEST(Eval, TestEnvsAreShared) {
    for (int j = 0; j < 5; ++j) {
        EXPECT_EQ(test_env("darkroom", 7, j)->tag(), test_env("darkroom", 7, j)->tag());
        EXPECT_EQ(test_env("darkroom", 7, j)->split(), Split::test);
    }
    EXPECT_NE(test_env("gaussian_bandit", 7, 0)->tag(), test_env("gaussian_bandit", 7, 1)->tag());
}

TEST(Eval, ThreadInvariant) {
    EvalConfig c = small_config();
    const MetricSeries a = eval_online(RandomAgent(), "gaussian_bandit", c, 5);
    c.threads = 3;
    const MetricSeries b = eval_online(RandomAgent(), "gaussian_bandit", c, 5);
    EXPECT_EQ(a, b);
}

TEST(Eval, CsvRoundTrip) {
    MetricSeries s;
    s.kind = MetricKind::return_vs_episode;
    s.x = {1, 2, 3};
    s.mean = {0.1, 1.0 / 3.0, 12.5};
    s.std_err = {0.0, 0.25, 1e-7};
    s.method = "SAD";
    s.family = "darkroom";
    s.seed = 11;
    MetricSeries t = s;
    t.method = "AD";
    t.kind = MetricKind::suboptimality_vs_horizon;
    const auto path = temp_path("roundtrip.csv");
    write_metric_csv({s, t}, path, "abc");
    const auto back = read_metric_csv(path);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], s);
    EXPECT_EQ(back[1], t);
    EXPECT_EQ(metric_csv({s}, "abc").rfind("# config_hash=abc\n", 0), 0u);
    std::filesystem::remove(path);
}

TEST(Eval, SvgIsWritten) {
    const MetricSeries s = eval_online(RandomAgent(), "gaussian_bandit", small_config(), 6);
    const auto path = temp_path("plot.svg");
    write_metric_svg({s}, path, "regret", "abc");
    EXPECT_GT(std::filesystem::file_size(path), 200u);
    std::filesystem::remove(path);
}

TEST(Eval, Helpers) {
    MetricSeries s;
    s.x = {1, 2, 3, 4};
    s.mean = {1, 2, 3, 4};
    s.std_err = {0, 0, 0, 0};
    EXPECT_DOUBLE_EQ(mean_over(s, 2, 3), 2.5);
    EXPECT_DOUBLE_EQ(value_at(s, 4), 4.0);
    EXPECT_THROW(value_at(s, 9), Error);
    EXPECT_EQ(parse_metric_kind(to_string(MetricKind::return_vs_horizon)), MetricKind::return_vs_horizon);
}

TEST(Eval, ConfigErrors) {
    EvalConfig c;
    c.num_test_envs = 0;
    EXPECT_THROW(c.validate(), Error);
    c = EvalConfig{};
    c.horizons = {-1};
    EXPECT_THROW(c.validate(), Error);
    EXPECT_THROW(eval_offline(RandomAgent(), "nope", EvalConfig{}, 1), Error);
}
