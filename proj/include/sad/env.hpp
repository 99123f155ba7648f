#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "sad/rng.hpp"

namespace sad {

enum class RewardKind { dense, sparse, bandit };
enum class Split { train, test };

std::string_view to_string(RewardKind kind) noexcept;
std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view s);

struct EnvSpec {
    int state_dim = 1;
    int num_actions = 1;
    int horizon = 0;
    RewardKind reward_kind = RewardKind::bandit;
    std::string env_family;
    // Per-dimension divisor that maps states into [0, 1] for the model.
    std::vector<double> state_scale;

    bool operator==(const EnvSpec&) const = default;
};

/// Fixed-length real vector with inline storage. Grid environments store
/// integer coordinates; bandits use the single zero state of length 1.
class StateVec {
public:
    static constexpr std::size_t kMaxDim = 4;

    StateVec() = default;
    explicit StateVec(std::size_t dim);
    StateVec(std::initializer_list<double> values);

    std::size_t size() const noexcept { return dim_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double& operator[](std::size_t i) noexcept { return values_[i]; }
    const double* begin() const noexcept { return values_.data(); }
    const double* end() const noexcept { return values_.data() + dim_; }

    bool operator==(const StateVec& other) const noexcept;

private:
    std::array<double, kMaxDim> values_{};
    std::size_t dim_ = 0;
};

struct ActionId {
    int index = 0;

    bool operator==(const ActionId&) const = default;
};

struct Transition {
    StateVec state;
    ActionId action;
    double reward = 0.0;
    StateVec next_state;

    bool operator==(const Transition&) const = default;
};

struct StepResult {
    double reward = 0.0;
    StateVec next_state;
};

/// Uniform random or tabular (per-state probability rows) behaviour policy.
class Policy {
public:
    enum class Kind { uniform_random, tabular };

    static Policy uniform(int num_actions);
    /// Rows indexed by Environment::state_index; each must sum to 1 within 1e-9.
    static Policy tabular(std::vector<std::vector<double>> probs);

    Kind kind() const noexcept { return kind_; }
    int num_actions() const noexcept { return num_actions_; }
    double probability(std::size_t state_index, ActionId a) const;
    ActionId sample(std::size_t state_index, RngStream& rng) const;

private:
    Kind kind_ = Kind::uniform_random;
    int num_actions_ = 1;
    std::vector<std::vector<double>> probs_;
};

/// One sampled task: public shape plus hidden reward/dynamics parameters.
///
/// Instances are single-owner and mutable (they carry an episode clock);
/// clone() gives an independent copy.
class Environment {
public:
    virtual ~Environment() = default;

    virtual const EnvSpec& spec() const noexcept = 0;

    /// Draws the initial state and sets the clock to 0.
    virtual StateVec reset() = 0;
    /// Teleports to s and sets the clock to 0.
    virtual void reset_to(const StateVec& s) = 0;
    /// Applies an action from the current state and advances the clock.
    virtual StepResult step(ActionId a, RngStream& rng) = 0;
    /// Pure dynamics: reward and successor for (s, a), no clock involved.
    virtual StepResult transition(const StateVec& s, ActionId a, RngStream& rng) const = 0;

    virtual std::size_t num_states() const noexcept = 0;
    virtual StateVec state_at(std::size_t index) const = 0;
    virtual std::size_t state_index(const StateVec& s) const = 0;
    StateVec sample_state_uniform(RngStream& rng) const;

    /// Identifier encoding family and hidden parameters; parse_env_tag inverts it.
    virtual std::string tag() const = 0;
    virtual std::unique_ptr<Environment> clone() const = 0;

    virtual StateVec current_state() const = 0;
    int clock() const noexcept { return clock_; }
    Split split() const noexcept { return split_; }
    void set_split(Split s) noexcept { split_ = s; }

protected:
    int clock_ = 0;
    Split split_ = Split::train;
};

using EnvInstance = std::unique_ptr<Environment>;

// Free-function forms of the environment operations.
StateVec reset(Environment& env);
void reset_to(Environment& env, const StateVec& s);
StepResult step(Environment& env, ActionId a, RngStream& rng);
StateVec sample_state_uniform(const Environment& env, RngStream& rng);

// ---------------------------------------------------------------- registry

/// Registered family names: gaussian_bandit, bernoulli_bandit, darkroom,
/// darkroom_large, dense_grid.
std::vector<std::string> registered_families();
bool is_registered(std::string_view family);
EnvSpec family_spec(std::string_view family);

/// Draws a task for the given split. Grid goals are partitioned 80/20 by a
/// permutation fixed per rng.master_seed(); the goal is drawn from rng.
EnvInstance sample_env(std::string_view family, Split split, RngStream& rng);

/// Rebuilds an instance from its tag (hidden parameters included).
EnvInstance parse_env_tag(std::string_view tag);

/// Goal cells of a grid family for the split, as state indices in row-major order.
std::vector<std::size_t> split_goals(std::string_view family, Split split, std::uint64_t master_seed);

}  // namespace sad
