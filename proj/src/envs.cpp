#include "sad/envs.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "sad/error.hpp"

namespace sad {

namespace {

void check_arm(ActionId arm, std::size_t num_arms) {
    if (arm.index < 0 || static_cast<std::size_t>(arm.index) >= num_arms) {
        throw Error(Errc::invalid_action, "arm " + std::to_string(arm.index));
    }
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_on(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, std::string_view tag) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw Error(Errc::unknown_env_tag, std::string(tag));
    }
    return v;
}

int parse_int(const std::string& s, std::string_view tag) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw Error(Errc::unknown_env_tag, std::string(tag));
    }
    return v;
}

}  // namespace

double reward_gaussian(const GaussianBanditParams& params, ActionId arm, RngStream& rng) {
    check_arm(arm, params.means.size());
    return rng.normal(params.means[static_cast<std::size_t>(arm.index)], params.sigma);
}

double reward_bernoulli(const BernoulliBanditParams& params, ActionId arm, RngStream& rng) {
    check_arm(arm, params.means.size());
    return rng.bernoulli(params.means[static_cast<std::size_t>(arm.index)]) ? 1.0 : 0.0;
}

int manhattan(Cell a, Cell b) noexcept { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

Cell grid_step(const GridParams& params, Cell s, ActionId a) {
    Cell n = s;
    switch (a.index) {
        case kUp: n.y -= 1; break;
        case kDown: n.y += 1; break;
        case kLeft: n.x -= 1; break;
        case kRight: n.x += 1; break;
        case kStay: break;
        default: throw Error(Errc::invalid_action, "grid action " + std::to_string(a.index));
    }
    n.x = std::clamp(n.x, 0, params.width - 1);
    n.y = std::clamp(n.y, 0, params.height - 1);
    return n;
}

double grid_reward(const GridParams& params, Cell next) {
    if (params.reward_kind == RewardKind::sparse) {
        return next == params.goal ? 1.0 : 0.0;
    }
    const int span = params.width + params.height - 2;
    if (span == 0) {
        return 1.0;
    }
    return 1.0 - static_cast<double>(manhattan(next, params.goal)) / span;
}

// ---------------------------------------------------------------- BanditEnv

BanditEnv::BanditEnv(std::string family, BanditKind kind, std::vector<double> means, double sigma)
    : kind_(kind), means_(std::move(means)), sigma_(sigma) {
    if (means_.empty()) {
        throw Error(Errc::invalid_argument, "bandit needs at least one arm");
    }
    if (kind_ == BanditKind::gaussian && sigma_ < 0.0) {
        throw Error(Errc::invalid_argument, "negative sigma");
    }
    spec_.state_dim = 1;
    spec_.num_actions = static_cast<int>(means_.size());
    spec_.horizon = 1;
    spec_.reward_kind = RewardKind::bandit;
    spec_.env_family = std::move(family);
    spec_.state_scale = {1.0};
}

StateVec BanditEnv::reset() {
    clock_ = 0;
    return StateVec(1);
}

void BanditEnv::reset_to(const StateVec& s) {
    if (s.size() != 1 || s[0] != 0.0) {
        throw Error(Errc::invalid_state, "bandits have the single zero state");
    }
    clock_ = 0;
}

StepResult BanditEnv::step(ActionId a, RngStream& rng) {
    StepResult r = transition(StateVec(1), a, rng);
    ++clock_;
    return r;
}

StepResult BanditEnv::transition(const StateVec& /*s*/, ActionId a, RngStream& rng) const {
    double reward = 0.0;
    if (kind_ == BanditKind::gaussian) {
        reward = reward_gaussian(GaussianBanditParams{means_, sigma_}, a, rng);
    } else {
        reward = reward_bernoulli(BernoulliBanditParams{means_}, a, rng);
    }
    return StepResult{reward, StateVec(1)};
}

StateVec BanditEnv::state_at(std::size_t index) const {
    if (index != 0) {
        throw Error(Errc::invalid_state, "bandit state index " + std::to_string(index));
    }
    return StateVec(1);
}

std::size_t BanditEnv::state_index(const StateVec& s) const {
    if (s.size() != 1) {
        throw Error(Errc::invalid_state, "bandit state must have length 1");
    }
    return 0;
}

std::string BanditEnv::tag() const {
    std::string out = spec_.env_family + ";kind=" + (kind_ == BanditKind::gaussian ? "gaussian" : "bernoulli");
    out += ";sigma=" + fmt_double(sigma_) + ";means=";
    for (std::size_t i = 0; i < means_.size(); ++i) {
        out += fmt_double(means_[i]);
        if (i + 1 < means_.size()) {
            out += ",";
        }
    }
    return out;
}

std::unique_ptr<Environment> BanditEnv::clone() const { return std::make_unique<BanditEnv>(*this); }

// ---------------------------------------------------------------- GridEnv

GridEnv::GridEnv(std::string family, GridParams params) : params_(params) {
    if (params_.width < 1 || params_.height < 1) {
        throw Error(Errc::invalid_argument, "grid dimensions must be positive");
    }
    if (params_.goal.x < 0 || params_.goal.x >= params_.width || params_.goal.y < 0 ||
        params_.goal.y >= params_.height) {
        throw Error(Errc::invalid_state, "goal outside grid");
    }
    if (params_.horizon < 0) {
        throw Error(Errc::invalid_argument, "negative horizon");
    }
    spec_.state_dim = 2;
    spec_.num_actions = kGridActions;
    spec_.horizon = params_.horizon;
    spec_.reward_kind = params_.reward_kind;
    spec_.env_family = std::move(family);
    spec_.state_scale = {static_cast<double>(std::max(1, params_.width - 1)),
                         static_cast<double>(std::max(1, params_.height - 1))};
    pos_ = start_cell();
}

Cell GridEnv::to_cell(const StateVec& s) const {
    if (s.size() != 2) {
        throw Error(Errc::invalid_state, "grid state must have length 2");
    }
    const double x = s[0];
    const double y = s[1];
    if (x != std::floor(x) || y != std::floor(y) || x < 0 || y < 0 || x >= params_.width || y >= params_.height) {
        throw Error(Errc::invalid_state, "(" + fmt_double(x) + "," + fmt_double(y) + ") outside " +
                                             std::to_string(params_.width) + "x" + std::to_string(params_.height));
    }
    return Cell{static_cast<int>(x), static_cast<int>(y)};
}

StateVec GridEnv::reset() {
    clock_ = 0;
    pos_ = start_cell();
    return to_state(pos_);
}

void GridEnv::reset_to(const StateVec& s) {
    pos_ = to_cell(s);
    clock_ = 0;
}

StepResult GridEnv::step(ActionId a, RngStream& rng) {
    if (clock_ >= params_.horizon) {
        throw Error(Errc::horizon_exceeded, "episode clock " + std::to_string(clock_));
    }
    StepResult r = transition(to_state(pos_), a, rng);
    pos_ = to_cell(r.next_state);
    ++clock_;
    return r;
}

StepResult GridEnv::transition(const StateVec& s, ActionId a, RngStream& /*rng*/) const {
    const Cell next = grid_step(params_, to_cell(s), a);
    return StepResult{grid_reward(params_, next), to_state(next)};
}

std::size_t GridEnv::num_states() const noexcept {
    return static_cast<std::size_t>(params_.width) * static_cast<std::size_t>(params_.height);
}

StateVec GridEnv::state_at(std::size_t index) const {
    if (index >= num_states()) {
        throw Error(Errc::invalid_state, "grid state index " + std::to_string(index));
    }
    const int i = static_cast<int>(index);
    return to_state(Cell{i % params_.width, i / params_.width});
}

std::size_t GridEnv::state_index(const StateVec& s) const {
    const Cell c = to_cell(s);
    return static_cast<std::size_t>(c.y * params_.width + c.x);
}

std::string GridEnv::tag() const {
    return spec_.env_family + ";w=" + std::to_string(params_.width) + ";h=" + std::to_string(params_.height) +
           ";goal=" + std::to_string(params_.goal.x) + "," + std::to_string(params_.goal.y) +
           ";T=" + std::to_string(params_.horizon) + ";reward=" + std::string(to_string(params_.reward_kind));
}

std::unique_ptr<Environment> GridEnv::clone() const { return std::make_unique<GridEnv>(*this); }

// ---------------------------------------------------------------- tags

EnvInstance parse_env_tag(std::string_view tag) {
    const std::vector<std::string> parts = split_on(tag, ';');
    if (parts.size() < 2) {
        throw Error(Errc::unknown_env_tag, std::string(tag));
    }
    std::map<std::string, std::string> kv;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        if (eq == std::string::npos) {
            throw Error(Errc::unknown_env_tag, std::string(tag));
        }
        kv[parts[i].substr(0, eq)] = parts[i].substr(eq + 1);
    }
    auto field = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw Error(Errc::unknown_env_tag, std::string(tag));
        }
        return it->second;
    };
    const std::string& family = parts[0];
    if (kv.count("kind") != 0) {
        std::vector<double> means;
        for (const std::string& m : split_on(field("means"), ',')) {
            means.push_back(parse_double(m, tag));
        }
        const BanditKind kind = field("kind") == "gaussian" ? BanditKind::gaussian : BanditKind::bernoulli;
        return std::make_unique<BanditEnv>(family, kind, std::move(means), parse_double(field("sigma"), tag));
    }
    const std::vector<std::string> goal = split_on(field("goal"), ',');
    if (goal.size() != 2) {
        throw Error(Errc::unknown_env_tag, std::string(tag));
    }
    const std::string& reward = field("reward");
    if (reward != "sparse" && reward != "dense") {
        throw Error(Errc::unknown_env_tag, std::string(tag));
    }
    GridParams p;
    p.width = parse_int(field("w"), tag);
    p.height = parse_int(field("h"), tag);
    p.goal = Cell{parse_int(goal[0], tag), parse_int(goal[1], tag)};
    p.horizon = parse_int(field("T"), tag);
    p.reward_kind = reward == "sparse" ? RewardKind::sparse : RewardKind::dense;
    return std::make_unique<GridEnv>(family, p);
}

}  // namespace sad
