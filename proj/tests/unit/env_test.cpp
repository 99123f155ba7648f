#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "sad/env.hpp"
#include "sad/envs.hpp"
#include "sad/error.hpp"

using namespace sad;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no sad::Error thrown";
    return Errc::io;
}

GridEnv darkroom_with_goal(int gx, int gy) {
    GridParams p;
    p.goal = {gx, gy};
    return GridEnv("darkroom", p);
}

}  // namespace

TEST(Rng, SameKeySameDraws) {
    RngStream a(123, 9);
    RngStream b(123, 9);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(a.next_u64(), b.next_u64());
    }
}

TEST(Rng, ChildDoesNotConsumeParent) {
    RngStream a(5, 1);
    RngStream b(5, 1);
    RngStream c = a.child(3);
    (void)c.next_u64();
    EXPECT_EQ(a.next_u64(), b.next_u64());
    EXPECT_NE(RngStream(5, 1).child(0).next_u64(), RngStream(5, 1).child(1).next_u64());
}

TEST(Rng, UniformIntIsUniform) {
    RngStream r(1, 1);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        ++counts[static_cast<std::size_t>(r.uniform_int(7))];
    }
    double chi2 = 0.0;
    for (int c : counts) {
        chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
    }
    EXPECT_LT(chi2, 22.46);  // df 6, p = 0.001
}

TEST(Registry, KnownFamilies) {
    for (const char* f : {"gaussian_bandit", "bernoulli_bandit", "darkroom", "darkroom_large", "dense_grid"}) {
        EXPECT_TRUE(is_registered(f)) << f;
    }
    EXPECT_FALSE(is_registered("miniworld"));
    RngStream r(0, 0);
    EXPECT_EQ(code_of([&] { sample_env("miniworld", Split::train, r); }), Errc::unknown_family);
}

TEST(Registry, Specs) {
    const EnvSpec dark = family_spec("darkroom");
    EXPECT_EQ(dark.state_dim, 2);
    EXPECT_EQ(dark.num_actions, 5);
    EXPECT_EQ(dark.horizon, 49);
    EXPECT_EQ(dark.reward_kind, RewardKind::sparse);
    EXPECT_EQ(family_spec("darkroom_large").horizon, 100);
    EXPECT_EQ(family_spec("gaussian_bandit").reward_kind, RewardKind::bandit);
    EXPECT_EQ(family_spec("dense_grid").reward_kind, RewardKind::dense);
}

TEST(Reset, DarkroomStartsAtCenter) {
    GridEnv env = darkroom_with_goal(0, 0);
    EXPECT_EQ(env.reset(), (StateVec{3, 3}));
    EXPECT_EQ(env.clock(), 0);
    GridParams big;
    big.width = big.height = 10;
    big.horizon = 100;
    GridEnv large("darkroom_large", big);
    EXPECT_EQ(large.reset(), (StateVec{5, 5}));
}

TEST(Reset, BanditIsZeroState) {
    BanditEnv b("gaussian_bandit", BanditKind::gaussian, {0.1, 0.2, 0.3, 0.4, 0.5}, 0.3);
    EXPECT_EQ(b.reset(), StateVec(1));
    EXPECT_EQ(b.reset()[0], 0.0);
    EXPECT_NO_THROW(b.reset_to(StateVec(1)));
}

TEST(Reset, DenseGridGolden) {
    RngStream r(11, 3);
    EnvInstance e = sample_env("dense_grid", Split::train, r);
    EXPECT_EQ(e->tag(), "dense_grid;w=7;h=7;goal=6,0;T=49;reward=dense");
    EXPECT_EQ(e->reset(), (StateVec{3, 3}));
}

TEST(ResetTo, TeleportAndBounds) {
    GridEnv env = darkroom_with_goal(6, 6);
    env.reset_to(StateVec{0, 6});
    RngStream r(0, 0);
    const StepResult s = env.step(ActionId{3}, r);
    EXPECT_EQ(s.next_state, (StateVec{1, 6}));
    EXPECT_EQ(code_of([&] { env.reset_to(StateVec{9, 9}); }), Errc::invalid_state);
    EXPECT_EQ(code_of([&] { env.reset_to(StateVec{1.5, 2}); }), Errc::invalid_state);
}

TEST(Step, DarkroomRewardAndWalls) {
    GridEnv env = darkroom_with_goal(4, 2);
    RngStream r(0, 0);
    env.reset_to(StateVec{3, 2});
    StepResult s = env.step(ActionId{3}, r);
    EXPECT_EQ(s.reward, 1.0);
    EXPECT_EQ(s.next_state, (StateVec{4, 2}));
    // staying on the goal keeps paying
    s = env.step(ActionId{4}, r);
    EXPECT_EQ(s.reward, 1.0);

    env.reset_to(StateVec{0, 0});
    s = env.step(ActionId{2}, r);
    EXPECT_EQ(s.next_state, (StateVec{0, 0}));
    EXPECT_EQ(s.reward, 0.0);
}

TEST(Step, ErrorsAndHorizon) {
    GridEnv env = darkroom_with_goal(0, 0);
    RngStream r(0, 0);
    env.reset();
    EXPECT_EQ(code_of([&] { env.step(ActionId{5}, r); }), Errc::invalid_action);
    EXPECT_EQ(code_of([&] { env.step(ActionId{-1}, r); }), Errc::invalid_action);
    for (int t = 0; t < 49; ++t) {
        env.step(ActionId{4}, r);
    }
    EXPECT_EQ(env.clock(), 49);
    EXPECT_EQ(code_of([&] { env.step(ActionId{4}, r); }), Errc::horizon_exceeded);

    BanditEnv b("gaussian_bandit", BanditKind::gaussian, {0.1, 0.2, 0.3, 0.4, 0.5}, 0.3);
    for (int t = 0; t < 500; ++t) {
        b.step(ActionId{0}, r);
    }
    EXPECT_EQ(code_of([&] { b.step(ActionId{7}, r); }), Errc::invalid_action);
}

TEST(Step, GaussianGolden) {
    BanditEnv b("gaussian_bandit", BanditKind::gaussian, {0.1, 0.5, 0.7, 0.2, 0.9}, 0.3);
    RngStream r(7, 2);
    EXPECT_EQ(b.step(ActionId{2}, r).reward, 0.80140270686069381);
}

TEST(Step, TransitionIsPure) {
    GridEnv env = darkroom_with_goal(2, 2);
    env.reset();
    RngStream r(0, 0);
    const StepResult s = env.transition(StateVec{1, 2}, ActionId{3}, r);
    EXPECT_EQ(s.next_state, (StateVec{2, 2}));
    EXPECT_EQ(s.reward, 1.0);
    EXPECT_EQ(env.clock(), 0);
    EXPECT_EQ(env.current_state(), (StateVec{3, 3}));
}

TEST(SampleState, Darkroom7x7ChiSquare) {
    GridEnv env = darkroom_with_goal(0, 0);
    RngStream r(2024, 1);
    std::vector<int> counts(49, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        ++counts[env.state_index(env.sample_state_uniform(r))];
    }
    const double e = n / 49.0;
    double chi2 = 0.0;
    for (int c : counts) {
        chi2 += (c - e) * (c - e) / e;
    }
    EXPECT_LT(chi2, 84.04);  // df 48, p = 0.001
}

TEST(SampleState, Grid10x10MaxCell) {
    GridParams p;
    p.width = p.height = 10;
    p.horizon = 100;
    GridEnv env("darkroom_large", p);
    RngStream r(2024, 2);
    std::vector<int> counts(100, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        ++counts[env.state_index(env.sample_state_uniform(r))];
    }
    const double sigma = std::sqrt(0.01 * 0.99 / n);
    const int mx = *std::max_element(counts.begin(), counts.end());
    EXPECT_LT(std::abs(mx / static_cast<double>(n) - 0.01), 3 * sigma);
}

TEST(SampleState, BanditAlwaysZero) {
    BanditEnv b("gaussian_bandit", BanditKind::gaussian, {0.5, 0.5, 0.5, 0.5, 0.5}, 0.3);
    RngStream r(0, 0);
    for (int i = 0; i < 10; ++i) {
        EXPECT_EQ(b.sample_state_uniform(r), StateVec(1));
    }
}

TEST(Split, DarkroomSizesAndDisjoint) {
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
        const auto train = split_goals("darkroom", Split::train, seed);
        const auto test = split_goals("darkroom", Split::test, seed);
        EXPECT_EQ(train.size(), 39u);
        EXPECT_EQ(test.size(), 10u);
        std::set<std::size_t> all(train.begin(), train.end());
        for (std::size_t g : test) {
            EXPECT_TRUE(all.insert(g).second);
        }
        EXPECT_EQ(all.size(), 49u);
    }
    EXPECT_EQ(split_goals("darkroom_large", Split::test, 3).size(), 20u);
    EXPECT_NE(split_goals("darkroom", Split::test, 0), split_goals("darkroom", Split::test, 1));
}

TEST(Split, SampledGoalsRespectSplit) {
    const auto test = split_goals("darkroom", Split::test, 77);
    const std::set<std::size_t> test_set(test.begin(), test.end());
    for (int i = 0; i < 300; ++i) {
        RngStream r(77, static_cast<std::uint64_t>(i));
        EnvInstance e = sample_env("darkroom", Split::train, r);
        auto* g = dynamic_cast<GridEnv*>(e.get());
        ASSERT_NE(g, nullptr);
        const std::size_t idx = g->state_index(GridEnv::to_state(g->params().goal));
        EXPECT_EQ(test_set.count(idx), 0u);
        EXPECT_EQ(e->split(), Split::train);
    }
}

TEST(SampleEnv, BanditMeans) {
    RngStream r(3, 3);
    for (int i = 0; i < 200; ++i) {
        EnvInstance e = sample_env(i % 2 ? "gaussian_bandit" : "bernoulli_bandit", Split::test, r);
        auto* b = dynamic_cast<BanditEnv*>(e.get());
        ASSERT_NE(b, nullptr);
        ASSERT_EQ(b->means().size(), 5u);
        for (double m : b->means()) {
            EXPECT_GE(m, 0.0);
            EXPECT_LE(m, 1.0);
        }
    }
}

TEST(EnvTag, RoundTrip) {
    RngStream r(8, 8);
    for (const char* f : {"gaussian_bandit", "bernoulli_bandit", "darkroom", "darkroom_large", "dense_grid"}) {
        EnvInstance e = sample_env(f, Split::train, r);
        EnvInstance back = parse_env_tag(e->tag());
        EXPECT_EQ(back->tag(), e->tag());
        EXPECT_EQ(back->spec(), e->spec());
    }
    EXPECT_EQ(code_of([] { parse_env_tag("nonsense"); }), Errc::unknown_env_tag);
}

TEST(Policy, UniformAndTabular) {
    const Policy u = Policy::uniform(5);
    EXPECT_DOUBLE_EQ(u.probability(0, ActionId{3}), 0.2);
    const Policy t = Policy::tabular({{0.0, 1.0}, {0.5, 0.5}});
    RngStream r(0, 0);
    for (int i = 0; i < 50; ++i) {
        EXPECT_EQ(t.sample(0, r).index, 1);
    }
    EXPECT_EQ(code_of([] { Policy::tabular({{0.3, 0.3}}); }), Errc::invalid_argument);
    EXPECT_EQ(code_of([] { Policy::tabular({{1.2, -0.2}}); }), Errc::invalid_argument);
}

// ---------------------------------------------------------------- suite

TEST(Rewards, GaussianZeroSigma) {
    GaussianBanditParams p{{0.5, 0.5, 0.5, 0.5, 0.5}, 0.0};
    RngStream r(0, 0);
    EXPECT_EQ(reward_gaussian(p, ActionId{2}, r), 0.5);
}

TEST(Rewards, GaussianMoments) {
    GaussianBanditParams p{{0.1, 0.7, 0.2, 0.3, 0.4}, 0.3};
    RngStream r(10, 10);
    const int n = 100000;
    double s = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = reward_gaussian(p, ActionId{1}, r);
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    EXPECT_NEAR(mean, 0.7, 0.01);
    EXPECT_NEAR(mean, 0.7, 4 * 0.3 / std::sqrt(n));
    EXPECT_NEAR(var, 0.09, 0.09 * 0.05);
}

TEST(Rewards, Bernoulli) {
    BernoulliBanditParams p{{1.0, 0.0, 0.3, 0.5, 0.5}};
    RngStream r(4, 4);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(reward_bernoulli(p, ActionId{0}, r), 1.0);
        EXPECT_EQ(reward_bernoulli(p, ActionId{1}, r), 0.0);
    }
    const int n = 100000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = reward_bernoulli(p, ActionId{2}, r);
        ASSERT_TRUE(x == 0.0 || x == 1.0);
        s += x;
    }
    EXPECT_NEAR(s / n, 0.3, 0.01);
}

TEST(GridStep, Moves) {
    GridParams p;
    EXPECT_EQ(grid_step(p, {3, 3}, ActionId{4}), (Cell{3, 3}));
    EXPECT_EQ(grid_step(p, {0, 0}, ActionId{0}), (Cell{0, 0}));
    EXPECT_EQ(grid_step(p, {2, 5}, ActionId{3}), (Cell{3, 5}));
    EXPECT_EQ(grid_step(p, {2, 5}, ActionId{0}), (Cell{2, 4}));
    EXPECT_EQ(grid_step(p, {2, 5}, ActionId{1}), (Cell{2, 6}));
    EXPECT_EQ(grid_step(p, {2, 5}, ActionId{2}), (Cell{1, 5}));
    EXPECT_EQ(grid_step(p, {6, 6}, ActionId{1}), (Cell{6, 6}));
    EXPECT_EQ(grid_step(p, {6, 6}, ActionId{3}), (Cell{6, 6}));
}

TEST(GridStep, StaysInsideAndMovesAtMostOne) {
    GridParams p;
    for (int x = 0; x < 7; ++x) {
        for (int y = 0; y < 7; ++y) {
            for (int a = 0; a < 5; ++a) {
                const Cell n = grid_step(p, {x, y}, ActionId{a});
                EXPECT_TRUE(n.x >= 0 && n.x < 7 && n.y >= 0 && n.y < 7);
                EXPECT_LE(manhattan(n, {x, y}), 1);
            }
        }
    }
}

TEST(DenseGrid, RewardShape) {
    GridParams p;
    p.goal = {2, 4};
    p.reward_kind = RewardKind::dense;
    EXPECT_EQ(grid_reward(p, p.goal), 1.0);
    for (int x = 0; x < 7; ++x) {
        for (int y = 0; y < 7; ++y) {
            const Cell c{x, y};
            const double r = grid_reward(p, c);
            EXPECT_GE(r, 0.0);
            EXPECT_LE(r, 1.0);
            if (!(c == p.goal)) {
                EXPECT_LT(r, 1.0);
            }
            for (int a = 0; a < 4; ++a) {
                const Cell n = grid_step(p, c, ActionId{a});
                if (manhattan(n, p.goal) < manhattan(c, p.goal)) {
                    EXPECT_GT(grid_reward(p, n), r);
                }
            }
        }
    }
}
