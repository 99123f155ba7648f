#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "sad/datagen.hpp"
#include "sad/envs.hpp"
#include "sad/error.hpp"
#include "sad/hash.hpp"
#include "sad/oracle.hpp"

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

GridEnv darkroom(int gx, int gy) {
    GridParams p;
    p.goal = {gx, gy};
    return GridEnv("darkroom", p);
}

GridEnv chain(int goal_x) {
    GridParams p;
    p.width = 5;
    p.height = 1;
    p.goal = {goal_x, 0};
    p.horizon = 5;
    p.reward_kind = RewardKind::dense;
    return GridEnv("dense_grid", p);
}

std::string context_text(const Context& c) {
    std::ostringstream o;
    o.precision(17);
    for (const Transition& t : c.transitions) {
        for (double v : t.state) {
            o << v << ' ';
        }
        o << t.action.index << ' ' << t.reward << ' ';
        for (double v : t.next_state) {
            o << v << ' ';
        }
        o << '\n';
    }
    return o.str();
}

// Expected discounted return of the first action followed by the policy,
// by enumerating every action sequence of length n+1.
double enumerate_return(const GridEnv& env, const Policy& pi, Cell s, ActionId a, int remaining, double gamma) {
    const Cell next = grid_step(env.params(), s, a);
    const double r = grid_reward(env.params(), next);
    if (remaining == 0) {
        return r;
    }
    double cont = 0.0;
    const std::size_t idx = env.state_index(GridEnv::to_state(next));
    for (int b = 0; b < 5; ++b) {
        const double p = pi.probability(idx, ActionId{b});
        if (p > 0.0) {
            cont += p * enumerate_return(env, pi, next, ActionId{b}, remaining - 1, gamma);
        }
    }
    return r + gamma * cont;
}

DatagenConfig dark_cfg(Method m, int n, int size) {
    DatagenConfig c;
    c.method = m;
    c.trust_horizon = n;
    c.context_len = 49;
    c.dataset_size = size;
    return c;
}

}  // namespace

// ---------------------------------------------------------------- contexts

TEST(CollectContext, Empty) {
    GridEnv env = darkroom(1, 1);
    RngStream r(0, 0);
    EXPECT_TRUE(collect_context(env, Policy::uniform(5), 0, r).empty());
}

TEST(CollectContext, DarkroomGoldenAndRewards) {
    RngStream base(5, 0);
    RngStream er = base.child(0);
    const EnvInstance env = sample_env("darkroom", Split::train, er);
    ASSERT_EQ(env->tag(), "darkroom;w=7;h=7;goal=6,5;T=49;reward=sparse");
    RngStream cr = base.child(1);
    const Context c = collect_context(*env, Policy::uniform(5), 49, cr);
    ASSERT_EQ(c.size(), 49u);
    EXPECT_EQ(hex64(fnv1a64(context_text(c))), "91dd03524df483ac");
    for (const Transition& t : c.transitions) {
        EXPECT_TRUE(t.reward == 0.0 || t.reward == 1.0);
        EXPECT_EQ(t.reward == 1.0, t.next_state == (StateVec{6, 5}));
    }
    EXPECT_EQ(env->clock(), 0);
}

TEST(CollectContext, BanditStatesAreZero) {
    BanditEnv b("gaussian_bandit", BanditKind::gaussian, {0.1, 0.2, 0.3, 0.4, 0.5}, 0.3);
    RngStream r(1, 1);
    const Context c = collect_context(b, Policy::uniform(5), 5, r);
    ASSERT_EQ(c.size(), 5u);
    for (const Transition& t : c.transitions) {
        EXPECT_EQ(t.state, StateVec(1));
        EXPECT_EQ(t.next_state, StateVec(1));
    }
}

// ---------------------------------------------------------------- dense

TEST(DistillDense, ZeroHorizonIsImmediateArgmax) {
    // Deterministic rewards, so N = 0 is the argmax of one-step rewards.
    GridEnv env = chain(4);
    RngStream r(2, 2);
    for (int i = 0; i < 50; ++i) {
        const DistilledPair p = distill_dense(env, Policy::uniform(5), 0, 0.99, r);
        const Cell q{static_cast<int>(p.query[0]), 0};
        double best = -1.0;
        int arg = 0;
        for (int a = 0; a < 5; ++a) {
            const double rw = grid_reward(env.params(), grid_step(env.params(), q, ActionId{a}));
            if (rw > best) {
                best = rw;
                arg = a;
            }
        }
        EXPECT_EQ(p.label.index, arg);
    }
}

TEST(DistillDense, ChainMatchesBruteForce) {
    GridEnv env = chain(1);
    // deterministic behaviour: always step left
    std::vector<std::vector<double>> table(5, std::vector<double>{0, 0, 1, 0, 0});
    const Policy left = Policy::tabular(table);
    RngStream r(3, 3);
    std::set<int> seen;
    for (int i = 0; i < 60; ++i) {
        const DistilledPair p = distill_dense(env, left, 2, 0.99, r);
        const Cell q{static_cast<int>(p.query[0]), 0};
        seen.insert(q.x);
        int arg = 0;
        double best = -1.0;
        for (int a = 0; a < 5; ++a) {
            const double v = enumerate_return(env, left, q, ActionId{a}, 2, 0.99);
            if (v > best + 1e-12) {
                best = v;
                arg = a;
            }
        }
        EXPECT_EQ(p.label.index, arg) << "query x=" << q.x;
    }
    EXPECT_EQ(seen.size(), 5u);
}

TEST(DistillDense, TiesGoToLowestIndex) {
    // On a 1-row chain up and down are both clamped to stay, so they tie with stay.
    GridEnv env = chain(2);
    std::vector<std::vector<double>> table(5, std::vector<double>{0, 0, 0, 0, 1});
    const Policy stay = Policy::tabular(table);
    RngStream r(4, 4);
    for (int i = 0; i < 40; ++i) {
        const DistilledPair p = distill_dense(env, stay, 3, 0.99, r);
        if (p.query[0] == 2.0) {
            EXPECT_EQ(p.label.index, 0);
        }
    }
}

TEST(DistillDense, Errors) {
    GridEnv env = chain(0);
    RngStream r(0, 0);
    EXPECT_EQ(code_of([&] { distill_dense(env, Policy::uniform(5), -1, 0.9, r); }), Errc::invalid_trust_horizon);
    EXPECT_EQ(code_of([&] { distill_dense(env, Policy::uniform(5), 6, 0.9, r); }), Errc::invalid_trust_horizon);
    GridEnv sparse = darkroom(0, 0);
    EXPECT_EQ(code_of([&] { distill_dense(sparse, Policy::uniform(5), 2, 0.9, r); }), Errc::method_env_mismatch);
}

// ---------------------------------------------------------------- sparse

TEST(DistillSparse, TrustHorizonTwoIsExact) {
    GridEnv env = darkroom(4, 2);
    RngStream r(5, 5);
    for (int i = 0; i < 300; ++i) {
        const SparseDistillResult p = distill_sparse(env, Policy::uniform(5), 2, 49, r);
        const Cell q = env.to_cell(p.query);
        ASSERT_LE(manhattan(q, {4, 2}), 1);
        if (q == Cell{3, 2}) {
            EXPECT_EQ(p.label.index, 3);
        } else if (q == Cell{5, 2}) {
            EXPECT_EQ(p.label.index, 2);
        } else if (q == Cell{4, 1}) {
            EXPECT_EQ(p.label.index, 1);
        } else if (q == Cell{4, 3}) {
            EXPECT_EQ(p.label.index, 0);
        } else {
            EXPECT_EQ(p.label.index, 4);
        }
        EXPECT_LT(*std::min_element(p.steps.begin(), p.steps.end()), 2);
    }
}

TEST(DistillSparse, ExitConditionHolds) {
    GridEnv env = darkroom(0, 6);
    RngStream r(6, 6);
    for (int n : {3, 10, 25, 49}) {
        for (int i = 0; i < 50; ++i) {
            const SparseDistillResult p = distill_sparse(env, Policy::uniform(5), n, 49, r);
            EXPECT_LT(p.steps[static_cast<std::size_t>(p.label.index)], n);
            EXPECT_EQ(*std::min_element(p.steps.begin(), p.steps.end()), p.steps[static_cast<std::size_t>(p.label.index)]);
        }
    }
}

TEST(DistillSparse, Errors) {
    GridEnv env = darkroom(2, 2);
    RngStream r(0, 0);
    EXPECT_EQ(code_of([&] { distill_sparse(env, Policy::uniform(5), 1, 49, r); }), Errc::invalid_trust_horizon);
    EXPECT_EQ(code_of([&] { distill_sparse(env, Policy::uniform(5), 50, 49, r); }), Errc::invalid_trust_horizon);
    EXPECT_EQ(code_of([&] { distill_sparse(env, Policy::uniform(5), 2, 49, r, 0); }), Errc::non_termination);
    BanditEnv b("gaussian_bandit", BanditKind::gaussian, {0.1, 0.2, 0.3, 0.4, 0.5}, 0.3);
    EXPECT_EQ(code_of([&] { distill_sparse(b, Policy::uniform(5), 2, 49, r); }), Errc::method_env_mismatch);
    EXPECT_EQ(code_of([&] { distill_sparse(env, Policy::uniform(4), 2, 49, r); }), Errc::invalid_argument);
}

// ---------------------------------------------------------------- bandit

TEST(DistillBandit, OneArm) {
    BanditEnv b("gaussian_bandit", BanditKind::gaussian, {0.3}, 0.3);
    RngStream r(0, 0);
    EXPECT_EQ(distill_bandit(b, Policy::uniform(1), 10, r).label.index, 0);
}

TEST(DistillBandit, TwoArmsClearGap) {
    BanditEnv b("gaussian_bandit", BanditKind::gaussian, {0.2, 0.8}, 0.3);
    int right = 0;
    for (int i = 0; i < 1000; ++i) {
        RngStream r(7, static_cast<std::uint64_t>(i));
        right += distill_bandit(b, Policy::uniform(2), 1000, r).label.index == 1;
    }
    EXPECT_GE(right, 999);
}

TEST(DistillBandit, InstanceAgreementAndMonotoneTrust) {
    std::vector<double> rates;
    for (int n : {10, 100, 1000}) {
        int agree = 0;
        for (int i = 0; i < 500; ++i) {
            RngStream er(8, static_cast<std::uint64_t>(i));
            const EnvInstance env = sample_env("gaussian_bandit", Split::train, er);
            const auto* b = dynamic_cast<const BanditEnv*>(env.get());
            RngStream lr = er.child(1);
            agree += distill_bandit(*env, Policy::uniform(5), n, lr).label == optimal_arm(b->means());
        }
        rates.push_back(agree / 500.0);
    }
    EXPECT_GE(rates[2], 0.90);
    EXPECT_LE(rates[0], rates[1]);
    EXPECT_LE(rates[1], rates[2]);
}

// ---------------------------------------------------------------- datasets

TEST(BuildDataset, Empty) {
    const Dataset d = build_dataset("darkroom", Split::train, dark_cfg(Method::SAD, 49, 0), 1);
    EXPECT_TRUE(d.samples.empty());
}

TEST(BuildDataset, GoldenDarkroom) {
    const Dataset d = build_dataset("darkroom", Split::train, dark_cfg(Method::SAD, 49, 3), 42);
    ASSERT_EQ(d.samples.size(), 3u);
    EXPECT_EQ(hex64(fnv1a64(dataset_to_string(d))), "c9df62a062cd8cde");
    EXPECT_EQ(d.samples[0].query_state, (StateVec{5, 2}));
    EXPECT_EQ(d.samples[0].action_label.index, 0);
    EXPECT_EQ(d.samples[1].env_tag, "darkroom;w=7;h=7;goal=1,6;T=49;reward=sparse");
    EXPECT_EQ(d.samples[2].action_label.index, 1);
}

TEST(BuildDataset, TrainTagsComeFromTrainGoals) {
    const Dataset d = build_dataset("darkroom", Split::train, dark_cfg(Method::SAD, 10, 200), 9);
    const auto goals = split_goals("darkroom", Split::train, 9);
    const std::set<std::size_t> train(goals.begin(), goals.end());
    for (const PretrainSample& s : d.samples) {
        const EnvInstance env = parse_env_tag(s.env_tag);
        const auto* g = dynamic_cast<const GridEnv*>(env.get());
        EXPECT_EQ(train.count(g->state_index(GridEnv::to_state(g->params().goal))), 1u);
        EXPECT_GE(s.action_label.index, 0);
        EXPECT_LT(s.action_label.index, 5);
        EXPECT_EQ(s.context.size(), 49u);
    }
}

TEST(BuildDataset, ThreadInvariant) {
    for (Method m : {Method::SAD, Method::AD, Method::DPT_random, Method::DIT}) {
        const DatagenConfig c = dark_cfg(m, 25, 160);
        const Dataset one = generate_dataset("darkroom", Split::train, c, 3, 1);
        const Dataset four = generate_dataset("darkroom", Split::train, c, 3, 4);
        EXPECT_EQ(dataset_to_string(one), dataset_to_string(four)) << to_string(m);
    }
    DatagenConfig b;
    b.method = Method::SAD;
    b.trust_horizon = 50;
    b.context_len = 20;
    b.dataset_size = 40;
    EXPECT_EQ(build_dataset("gaussian_bandit", Split::train, b, 1, 1),
              build_dataset("gaussian_bandit", Split::train, b, 1, 3));
}

TEST(BuildDataset, ConfigErrors) {
    EXPECT_EQ(code_of([] { build_dataset("darkroom", Split::train, dark_cfg(Method::SAD, 1, 5), 1); }),
              Errc::invalid_trust_horizon);
    EXPECT_EQ(code_of([] { build_dataset("darkroom", Split::train, dark_cfg(Method::SAD, 50, 5), 1); }),
              Errc::invalid_trust_horizon);
    EXPECT_EQ(code_of([] { build_dataset("darkroom", Split::train, dark_cfg(Method::AD, 10, 5), 1); }),
              Errc::config_invalid);
    DatagenConfig c = dark_cfg(Method::SAD, 10, 5);
    c.gamma = 0.0;
    EXPECT_EQ(code_of([&] { build_dataset("darkroom", Split::train, c, 1); }), Errc::config_invalid);
    EXPECT_EQ(code_of([] { build_dataset("nowhere", Split::train, dark_cfg(Method::SAD, 10, 5), 1); }),
              Errc::unknown_family);
}

// ---------------------------------------------------------------- baselines

TEST(Baselines, AdGoldenStream) {
    DatagenConfig c = dark_cfg(Method::AD, 49, 147);
    c.ad_episodes = 3;
    const Dataset d = build_baseline_dataset(Method::AD, "darkroom", Split::train, c, 42);
    ASSERT_EQ(d.samples.size(), 147u);
    std::ostringstream o;
    for (const PretrainSample& s : d.samples) {
        o << s.query_state[0] << ',' << s.query_state[1] << ',' << s.action_label.index << ';';
    }
    EXPECT_EQ(hex64(fnv1a64(o.str())), "ff0ead5d65659da1");
    // episodes restart at the center and the history is contiguous within one
    for (std::size_t t : {0u, 49u, 98u}) {
        EXPECT_EQ(d.samples[t].query_state, (StateVec{3, 3}));
    }
    for (std::size_t t = 1; t < 147; ++t) {
        const PretrainSample& s = d.samples[t];
        EXPECT_EQ(s.context.size(), std::min<std::size_t>(t, 49));
        if (t % 49 != 0) {
            EXPECT_EQ(s.context.transitions.back().next_state, s.query_state);
            EXPECT_EQ(s.context.transitions.back().action, d.samples[t - 1].action_label);
        }
    }
}

TEST(Baselines, DptLabelsFollowPolicy) {
    const Dataset d = build_baseline_dataset(Method::DPT_random, "darkroom", Split::train,
                                             dark_cfg(Method::DPT_random, 49, 5000), 4);
    std::vector<int> counts(5, 0);
    for (const PretrainSample& s : d.samples) {
        ++counts[static_cast<std::size_t>(s.action_label.index)];
        EXPECT_EQ(s.context.size(), 49u);
        EXPECT_EQ(s.weight, 1.0);
    }
    for (int c : counts) {
        EXPECT_LT(std::abs(c - 1000), 3 * std::sqrt(5000 * 0.2 * 0.8));
    }
}

TEST(Baselines, DitWeightsAndNoLabelLeak) {
    const Dataset d =
        build_baseline_dataset(Method::DIT, "darkroom", Split::train, dark_cfg(Method::DIT, 49, 98), 6);
    ASSERT_EQ(d.samples.size(), 98u);
    for (std::size_t g = 0; g < 2; ++g) {
        double total = 0.0;
        for (std::size_t t = 0; t < 49; ++t) {
            const PretrainSample& s = d.samples[g * 49 + t];
            EXPECT_GE(s.weight, 0.0);
            EXPECT_EQ(s.context.size(), t);
            total += s.weight;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
    DatagenConfig short_ctx = dark_cfg(Method::DIT, 49, 10);
    short_ctx.context_len = 20;
    EXPECT_EQ(code_of([&] { build_baseline_dataset(Method::DIT, "darkroom", Split::train, short_ctx, 1); }),
              Errc::method_env_mismatch);
}

TEST(Baselines, DitWeightFormula) {
    for (double w : dit_weights(std::vector<double>(10, 0.0), 0.99, 0.3)) {
        EXPECT_NEAR(w, 0.1, 1e-15);
    }
    std::vector<double> last(8, 0.0);
    last.back() = 1.0;
    for (double w : dit_weights(last, 1.0, 0.3)) {
        EXPECT_NEAR(w, 0.125, 1e-15);
    }
    const std::vector<double> r{0.0, 1.0, 0.5};
    const std::vector<double> w = dit_weights(r, 0.5, 2.0);
    // returns-to-go: 0.5 + 0.125 = 0.625, 1.25, 0.5
    const double z = std::exp(0.625 / 2) + std::exp(1.25 / 2) + std::exp(0.5 / 2);
    EXPECT_NEAR(w[0], std::exp(0.625 / 2) / z, 1e-15);
    EXPECT_NEAR(w[1], std::exp(1.25 / 2) / z, 1e-15);
    EXPECT_NEAR(w[2], std::exp(0.5 / 2) / z, 1e-15);
    EXPECT_EQ(code_of([] { dit_weights({1.0}, 0.9, 0.0); }), Errc::config_invalid);
}

TEST(Baselines, BanditHistories) {
    DatagenConfig c;
    c.context_len = 30;
    c.dataset_size = 75;
    const Dataset ad = build_baseline_dataset(Method::AD, "gaussian_bandit", Split::train, c, 2);
    ASSERT_EQ(ad.samples.size(), 75u);
    EXPECT_EQ(ad.samples[29].context.size(), 29u);
    EXPECT_EQ(ad.samples[30].context.size(), 0u);
    EXPECT_NE(ad.samples[0].env_tag, ad.samples[30].env_tag);
    EXPECT_THROW(build_baseline_dataset(Method::SAD, "gaussian_bandit", Split::train, c, 2), Error);
}
