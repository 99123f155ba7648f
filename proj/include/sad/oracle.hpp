#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sad/dataset.hpp"
#include "sad/envs.hpp"

namespace sad {

struct OracleReport {
    double agreement_rate = 0.0;
    std::int64_t sample_count = 0;
    /// Grids only: Manhattan distance of the query to the goal -> rate / count.
    std::map<int, double> per_distance;
    std::map<int, std::int64_t> per_distance_count;
};

/// Argmax of the true means, ties to the lowest index.
ActionId optimal_arm(const std::vector<double>& means);

/// Actions whose successor is closest to the goal in Manhattan distance,
/// ascending. Off-goal that is every distance-reducing move; at the goal it
/// is stay plus any move that the walls clamp back onto the goal.
std::vector<ActionId> grid_optimal_actions(const GridParams& params, Cell s);

/// Finite-horizon value iteration (params.horizon backups) with discount
/// gamma; per state (row-major index) the actions within tol of the best Q.
std::vector<std::vector<ActionId>> value_iteration_optimal_actions(const GridParams& params, double gamma,
                                                                   double tol = 1e-12);

/// Fraction of samples whose label is oracle-optimal; grids add a
/// per-distance breakdown.
OracleReport label_accuracy(const Dataset& dataset);

/// Expected agreement of a uniformly random label on the dataset's query
/// states: mean over samples of |optimal set| / num_actions.
double random_label_density(const Dataset& dataset);

/// Fresh (env, s_q) draws labelled by the SAD distiller for the family's
/// reward kind; trial i uses RngStream(master_seed, i).
OracleReport assumption_check(std::string_view family, const Policy& policy, int N, int trials,
                              std::uint64_t master_seed, double gamma = 0.99);

/// Query-state spread of a grid dataset.
struct CoverageReport {
    /// Distinct (goal, query) pairs.
    std::int64_t distinct_pairs = 0;
    /// Fraction of queries within distance 1 of the goal.
    double near_goal_fraction = 0.0;
    double mean_distance = 0.0;
    std::int64_t sample_count = 0;
};

CoverageReport query_coverage(const Dataset& dataset);

/// rate plus per-distance rows; first line "# config_hash=..." when given.
void write_oracle_report(const OracleReport& report, const std::filesystem::path& path,
                         const std::string& config_hash);

}  // namespace sad
