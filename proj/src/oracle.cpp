#include "sad/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_map>

#include "sad/datagen.hpp"
#include "sad/error.hpp"

namespace sad {

ActionId optimal_arm(const std::vector<double>& means) {
    if (means.empty()) {
        throw Error(Errc::invalid_argument, "optimal_arm needs at least one arm");
    }
    // max_element keeps the first maximum
    return ActionId{static_cast<int>(std::max_element(means.begin(), means.end()) - means.begin())};
}

std::vector<ActionId> grid_optimal_actions(const GridParams& params, Cell s) {
    int best = std::numeric_limits<int>::max();
    std::vector<ActionId> out;
    for (int a = 0; a < kGridActions; ++a) {
        const int d = manhattan(grid_step(params, s, ActionId{a}), params.goal);
        if (d < best) {
            best = d;
            out.clear();
        }
        if (d == best) {
            out.push_back(ActionId{a});
        }
    }
    return out;
}

std::vector<std::vector<ActionId>> value_iteration_optimal_actions(const GridParams& params, double gamma,
                                                                   double tol) {
    const int w = params.width;
    const int h = params.height;
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    auto cell = [w](std::size_t i) { return Cell{static_cast<int>(i) % w, static_cast<int>(i) / w}; };
    auto index = [w](Cell c) { return static_cast<std::size_t>(c.y * w + c.x); };
    std::vector<double> v(n, 0.0);
    std::vector<double> next(n);
    std::vector<std::vector<double>> q(n, std::vector<double>(kGridActions, 0.0));
    const int backups = std::max(params.horizon, 1);
    for (int k = 0; k < backups; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < kGridActions; ++a) {
                const Cell c2 = grid_step(params, cell(i), ActionId{a});
                q[i][static_cast<std::size_t>(a)] = grid_reward(params, c2) + gamma * v[index(c2)];
                best = std::max(best, q[i][static_cast<std::size_t>(a)]);
            }
            next[i] = best;
        }
        v.swap(next);
    }
    std::vector<std::vector<ActionId>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double best = *std::max_element(q[i].begin(), q[i].end());
        for (int a = 0; a < kGridActions; ++a) {
            if (q[i][static_cast<std::size_t>(a)] >= best - tol) {
                out[i].push_back(ActionId{a});
            }
        }
    }
    return out;
}

namespace {

// Tag -> instance cache; datasets reuse a handful of tasks many times.
class TagCache {
public:
    const Environment& get(const std::string& tag) {
        auto it = envs_.find(tag);
        if (it == envs_.end()) {
            it = envs_.emplace(tag, parse_env_tag(tag)).first;
        }
        return *it->second;
    }

private:
    std::unordered_map<std::string, EnvInstance> envs_;
};

std::vector<ActionId> optimal_set(const Environment& env, const StateVec& s) {
    if (const auto* b = dynamic_cast<const BanditEnv*>(&env)) {
        return {optimal_arm(b->means())};
    }
    if (const auto* g = dynamic_cast<const GridEnv*>(&env)) {
        return grid_optimal_actions(g->params(), g->to_cell(s));
    }
    throw Error(Errc::unknown_env_tag, env.tag());
}

int goal_distance(const Environment& env, const StateVec& s) {
    if (const auto* g = dynamic_cast<const GridEnv*>(&env)) {
        return manhattan(g->to_cell(s), g->params().goal);
    }
    return -1;
}

bool contains(const std::vector<ActionId>& set, ActionId a) {
    return std::find(set.begin(), set.end(), a) != set.end();
}

struct Tally {
    std::int64_t hits = 0;
    std::int64_t total = 0;
    std::map<int, std::pair<std::int64_t, std::int64_t>> by_dist;

    void add(bool hit, int dist) {
        hits += hit ? 1 : 0;
        ++total;
        if (dist >= 0) {
            auto& [h, t] = by_dist[dist];
            h += hit ? 1 : 0;
            ++t;
        }
    }

    OracleReport report() const {
        OracleReport r;
        r.sample_count = total;
        r.agreement_rate = total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
        for (const auto& [d, ht] : by_dist) {
            r.per_distance[d] = static_cast<double>(ht.first) / static_cast<double>(ht.second);
            r.per_distance_count[d] = ht.second;
        }
        return r;
    }
};

}  // namespace

OracleReport label_accuracy(const Dataset& dataset) {
    TagCache cache;
    Tally tally;
    for (const PretrainSample& s : dataset.samples) {
        const Environment& env = cache.get(s.env_tag);
        tally.add(contains(optimal_set(env, s.query_state), s.action_label), goal_distance(env, s.query_state));
    }
    return tally.report();
}

double random_label_density(const Dataset& dataset) {
    if (dataset.samples.empty()) {
        return 0.0;
    }
    TagCache cache;
    double total = 0.0;
    for (const PretrainSample& s : dataset.samples) {
        const Environment& env = cache.get(s.env_tag);
        total += static_cast<double>(optimal_set(env, s.query_state).size()) /
                 static_cast<double>(env.spec().num_actions);
    }
    return total / static_cast<double>(dataset.samples.size());
}

OracleReport assumption_check(std::string_view family, const Policy& policy, int N, int trials,
                              std::uint64_t master_seed, double gamma) {
    if (trials < 1) {
        throw Error(Errc::invalid_argument, "assumption_check needs trials >= 1");
    }
    Tally tally;
    for (int i = 0; i < trials; ++i) {
        const RngStream base(master_seed, static_cast<std::uint64_t>(i));
        RngStream env_rng = base.child(0);
        RngStream label_rng = base.child(2);
        const EnvInstance env = sample_env(family, Split::train, env_rng);
        DistilledPair p;
        switch (env->spec().reward_kind) {
            case RewardKind::bandit:
                p = distill_bandit(*env, policy, N, label_rng);
                break;
            case RewardKind::dense:
                p = distill_dense(*env, policy, N, gamma, label_rng);
                break;
            case RewardKind::sparse: {
                const SparseDistillResult r = distill_sparse(*env, policy, N, env->spec().horizon, label_rng);
                p = {r.query, r.label};
                break;
            }
        }
        tally.add(contains(optimal_set(*env, p.query), p.label), goal_distance(*env, p.query));
    }
    return tally.report();
}

CoverageReport query_coverage(const Dataset& dataset) {
    TagCache cache;
    std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> pairs;
    CoverageReport r;
    std::int64_t near = 0;
    double dist = 0.0;
    for (const PretrainSample& s : dataset.samples) {
        const auto* g = dynamic_cast<const GridEnv*>(&cache.get(s.env_tag));
        if (g == nullptr) {
            throw Error(Errc::method_env_mismatch, "query coverage is defined for grid datasets only");
        }
        const Cell q = g->to_cell(s.query_state);
        const Cell goal = g->params().goal;
        pairs.insert({{goal.x, goal.y}, {q.x, q.y}});
        const int d = manhattan(q, goal);
        near += d <= 1 ? 1 : 0;
        dist += d;
        ++r.sample_count;
    }
    r.distinct_pairs = static_cast<std::int64_t>(pairs.size());
    if (r.sample_count > 0) {
        r.near_goal_fraction = static_cast<double>(near) / static_cast<double>(r.sample_count);
        r.mean_distance = dist / static_cast<double>(r.sample_count);
    }
    return r;
}

void write_oracle_report(const OracleReport& report, const std::filesystem::path& path,
                         const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Errc::io, "cannot write " + path.string());
    }
    if (!config_hash.empty()) {
        out << "# config_hash=" << config_hash << '\n';
    }
    out << "distance,rate,count\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "all,%.17g,%lld\n", report.agreement_rate,
                  static_cast<long long>(report.sample_count));
    out << buf;
    for (const auto& [d, rate] : report.per_distance) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%lld\n", d, rate,
                      static_cast<long long>(report.per_distance_count.at(d)));
        out << buf;
    }
}

}  // namespace sad
