#include "sad/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sad/envs.hpp"
#include "sad/error.hpp"

namespace sad {

std::string_view to_string(RewardKind kind) noexcept {
    switch (kind) {
        case RewardKind::dense: return "dense";
        case RewardKind::sparse: return "sparse";
        case RewardKind::bandit: return "bandit";
    }
    return "?";
}

std::string_view to_string(Split split) noexcept { return split == Split::train ? "train" : "test"; }

Split parse_split(std::string_view s) {
    if (s == "train") {
        return Split::train;
    }
    if (s == "test") {
        return Split::test;
    }
    throw Error(Errc::invalid_argument, "unknown split '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- StateVec

StateVec::StateVec(std::size_t dim) : dim_(dim) {
    if (dim > kMaxDim) {
        throw Error(Errc::shape_mismatch, "state dimension exceeds " + std::to_string(kMaxDim));
    }
}

StateVec::StateVec(std::initializer_list<double> values) : StateVec(values.size()) {
    std::copy(values.begin(), values.end(), values_.begin());
}

bool StateVec::operator==(const StateVec& other) const noexcept {
    return dim_ == other.dim_ && std::equal(begin(), end(), other.begin());
}

// ---------------------------------------------------------------- Policy

Policy Policy::uniform(int num_actions) {
    if (num_actions < 1) {
        throw Error(Errc::invalid_argument, "policy needs at least one action");
    }
    Policy p;
    p.kind_ = Kind::uniform_random;
    p.num_actions_ = num_actions;
    return p;
}

Policy Policy::tabular(std::vector<std::vector<double>> probs) {
    if (probs.empty() || probs.front().empty()) {
        throw Error(Errc::invalid_argument, "tabular policy needs a non-empty table");
    }
    const std::size_t n = probs.front().size();
    for (const auto& row : probs) {
        if (row.size() != n) {
            throw Error(Errc::invalid_argument, "ragged policy table");
        }
        double total = 0.0;
        for (double p : row) {
            if (!(p >= 0.0)) {
                throw Error(Errc::invalid_argument, "negative action probability");
            }
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw Error(Errc::invalid_argument, "action probabilities must sum to 1");
        }
    }
    Policy p;
    p.kind_ = Kind::tabular;
    p.num_actions_ = static_cast<int>(n);
    p.probs_ = std::move(probs);
    return p;
}

double Policy::probability(std::size_t state_index, ActionId a) const {
    if (a.index < 0 || a.index >= num_actions_) {
        throw Error(Errc::invalid_action, "action " + std::to_string(a.index));
    }
    if (kind_ == Kind::uniform_random) {
        return 1.0 / num_actions_;
    }
    return probs_.at(state_index)[static_cast<std::size_t>(a.index)];
}

ActionId Policy::sample(std::size_t state_index, RngStream& rng) const {
    if (kind_ == Kind::uniform_random) {
        return ActionId{rng.uniform_int(num_actions_)};
    }
    const auto& row = probs_.at(state_index);
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t a = 0; a < row.size(); ++a) {
        acc += row[a];
        if (u < acc) {
            return ActionId{static_cast<int>(a)};
        }
    }
    // u landed in the rounding slack above the last cumulative sum
    for (std::size_t a = row.size(); a-- > 0;) {
        if (row[a] > 0.0) {
            return ActionId{static_cast<int>(a)};
        }
    }
    return ActionId{0};
}

// ---------------------------------------------------------------- Environment

StateVec Environment::sample_state_uniform(RngStream& rng) const {
    return state_at(static_cast<std::size_t>(rng.uniform_int(static_cast<int>(num_states()))));
}

StateVec reset(Environment& env) { return env.reset(); }
void reset_to(Environment& env, const StateVec& s) { env.reset_to(s); }
StepResult step(Environment& env, ActionId a, RngStream& rng) { return env.step(a, rng); }
StateVec sample_state_uniform(const Environment& env, RngStream& rng) { return env.sample_state_uniform(rng); }

// ---------------------------------------------------------------- registry

namespace {

struct GridFamily {
    const char* name;
    int width;
    int height;
    int horizon;
    RewardKind reward;
};

constexpr GridFamily kGridFamilies[] = {
    {"darkroom", 7, 7, 49, RewardKind::sparse},
    {"darkroom_large", 10, 10, 100, RewardKind::sparse},
    {"dense_grid", 7, 7, 49, RewardKind::dense},
};

constexpr int kBanditArms = 5;
constexpr double kGaussianSigma = 0.3;
// Stream used for the goal permutation; independent of all per-sample streams.
constexpr std::uint64_t kSplitStream = 0x5EED5B117ULL;

const GridFamily* find_grid(std::string_view family) {
    for (const auto& g : kGridFamilies) {
        if (family == g.name) {
            return &g;
        }
    }
    return nullptr;
}

bool is_bandit_family(std::string_view family) {
    return family == "gaussian_bandit" || family == "bernoulli_bandit";
}

}  // namespace

std::vector<std::string> registered_families() {
    std::vector<std::string> out = {"gaussian_bandit", "bernoulli_bandit"};
    for (const auto& g : kGridFamilies) {
        out.emplace_back(g.name);
    }
    return out;
}

bool is_registered(std::string_view family) { return is_bandit_family(family) || find_grid(family) != nullptr; }

EnvSpec family_spec(std::string_view family) {
    if (is_bandit_family(family)) {
        return BanditEnv(std::string(family), BanditKind::gaussian, std::vector<double>(kBanditArms, 0.5),
                         kGaussianSigma)
            .spec();
    }
    if (const GridFamily* g = find_grid(family)) {
        return GridEnv(g->name, GridParams{g->width, g->height, Cell{0, 0}, g->horizon, g->reward}).spec();
    }
    throw Error(Errc::unknown_family, std::string(family));
}

std::vector<std::size_t> split_goals(std::string_view family, Split split, std::uint64_t master_seed) {
    const GridFamily* g = find_grid(family);
    if (g == nullptr) {
        throw Error(Errc::unknown_family, "no goal split for '" + std::string(family) + "'");
    }
    const std::size_t n = static_cast<std::size_t>(g->width * g->height);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    RngStream rng(master_seed, kSplitStream);
    for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i + 1)));
        std::swap(perm[i], perm[j]);
    }
    // round-half-up of 20%
    const std::size_t n_test = (n * 2 + 5) / 10;
    std::vector<std::size_t> out;
    if (split == Split::test) {
        out.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    } else {
        out.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

EnvInstance sample_env(std::string_view family, Split split, RngStream& rng) {
    EnvInstance env;
    if (family == "gaussian_bandit") {
        std::vector<double> means(kBanditArms);
        for (double& m : means) {
            m = rng.uniform();
        }
        env = std::make_unique<BanditEnv>("gaussian_bandit", BanditKind::gaussian, std::move(means), kGaussianSigma);
    } else if (family == "bernoulli_bandit") {
        std::vector<double> means(kBanditArms);
        for (double& m : means) {
            m = rng.beta(1.0, 1.0);
        }
        env = std::make_unique<BanditEnv>("bernoulli_bandit", BanditKind::bernoulli, std::move(means), 0.0);
    } else if (const GridFamily* g = find_grid(family)) {
        const std::vector<std::size_t> goals = split_goals(family, split, rng.master_seed());
        const std::size_t goal = goals[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(goals.size())))];
        const Cell cell{static_cast<int>(goal) % g->width, static_cast<int>(goal) / g->width};
        env = std::make_unique<GridEnv>(g->name, GridParams{g->width, g->height, cell, g->horizon, g->reward});
    } else {
        throw Error(Errc::unknown_family, std::string(family));
    }
    env->set_split(split);
    env->reset();
    return env;
}

}  // namespace sad
