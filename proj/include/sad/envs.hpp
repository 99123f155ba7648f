#pragma once

#include <array>
#include <string>
#include <vector>

#include "sad/env.hpp"

namespace sad {

enum class BanditKind { gaussian, bernoulli };

struct GaussianBanditParams {
    std::vector<double> means;
    double sigma = 0.3;
};

struct BernoulliBanditParams {
    std::vector<double> means;
};

/// Action order is fixed: up, down, left, right, stay. x grows rightward and
/// y grows downward, so "up" decreases y.
enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };
inline constexpr int kGridActions = 5;

struct Cell {
    int x = 0;
    int y = 0;

    bool operator==(const Cell&) const = default;
};

struct GridParams {
    int width = 7;
    int height = 7;
    Cell goal;
    int horizon = 49;
    RewardKind reward_kind = RewardKind::sparse;
};

using DarkroomParams = GridParams;
using DenseGridParams = GridParams;

double reward_gaussian(const GaussianBanditParams& params, ActionId arm, RngStream& rng);
double reward_bernoulli(const BernoulliBanditParams& params, ActionId arm, RngStream& rng);
/// Deterministic move with clamping at the walls.
Cell grid_step(const GridParams& params, Cell s, ActionId a);
int manhattan(Cell a, Cell b) noexcept;
/// Sparse: 1 at the goal, else 0. Dense: 1 - manhattan/(width+height-2).
double grid_reward(const GridParams& params, Cell next);

class BanditEnv final : public Environment {
public:
    BanditEnv(std::string family, BanditKind kind, std::vector<double> means, double sigma);

    const EnvSpec& spec() const noexcept override { return spec_; }
    StateVec reset() override;
    void reset_to(const StateVec& s) override;
    StepResult step(ActionId a, RngStream& rng) override;
    StepResult transition(const StateVec& s, ActionId a, RngStream& rng) const override;
    std::size_t num_states() const noexcept override { return 1; }
    StateVec state_at(std::size_t index) const override;
    std::size_t state_index(const StateVec& s) const override;
    std::string tag() const override;
    std::unique_ptr<Environment> clone() const override;
    StateVec current_state() const override { return StateVec(1); }

    BanditKind kind() const noexcept { return kind_; }
    const std::vector<double>& means() const noexcept { return means_; }
    double sigma() const noexcept { return sigma_; }

private:
    EnvSpec spec_;
    BanditKind kind_;
    std::vector<double> means_;
    double sigma_;
};

class GridEnv final : public Environment {
public:
    GridEnv(std::string family, GridParams params);

    const EnvSpec& spec() const noexcept override { return spec_; }
    /// Episodes start at the grid center.
    StateVec reset() override;
    void reset_to(const StateVec& s) override;
    StepResult step(ActionId a, RngStream& rng) override;
    StepResult transition(const StateVec& s, ActionId a, RngStream& rng) const override;
    std::size_t num_states() const noexcept override;
    StateVec state_at(std::size_t index) const override;
    std::size_t state_index(const StateVec& s) const override;
    std::string tag() const override;
    std::unique_ptr<Environment> clone() const override;
    StateVec current_state() const override { return to_state(pos_); }

    const GridParams& params() const noexcept { return params_; }
    Cell start_cell() const noexcept { return {params_.width / 2, params_.height / 2}; }

    Cell to_cell(const StateVec& s) const;
    static StateVec to_state(Cell c) { return StateVec{static_cast<double>(c.x), static_cast<double>(c.y)}; }

private:
    EnvSpec spec_;
    GridParams params_;
    Cell pos_;
};

}  // namespace sad
