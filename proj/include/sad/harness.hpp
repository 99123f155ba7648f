#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sad/dataset.hpp"
#include "sad/eval.hpp"
#include "sad/model.hpp"
#include "sad/trainer.hpp"

namespace sad {

struct ExperimentConfig {
    std::string family = "gaussian_bandit";
    Method method = Method::SAD;
    std::uint64_t master_seed = 0;
    std::string output_dir = "out";
    /// Family the evaluation stages run on; empty means `family`. A bandit
    /// model can be evaluated on the other bandit family this way.
    std::string eval_family;
    DatagenConfig datagen;
    model::ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
    /// Independent runs per evaluation; run r uses master_seed + r.
    int runs = 1;
    std::string ablate_axis = "trust_horizon";
    std::vector<int> ablate_values;
    /// First entry is the reference method of the improvement table.
    std::vector<Method> compare_methods{Method::SAD, Method::AD, Method::DPT_random, Method::DIT};

    void validate() const;
    const std::string& evaluation_family() const { return eval_family.empty() ? family : eval_family; }
};

/// Family-dependent defaults (dataset size, context length, trust horizon).
ExperimentConfig default_config(std::string_view family);

/// JSON object; "family" selects the defaults, every other key overrides
/// one. Unknown keys are config errors.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved config as canonical JSON (sorted keys).
std::string config_to_json(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical JSON with output_dir and thread counts
/// removed, so it identifies results rather than where or how fast they
/// were computed.
std::string config_hash(const ExperimentConfig& config);

/// Improvement of the reference over a baseline when lower is better
/// (suboptimality, regret): (baseline - reference) / reference.
double improvement_lower_better(double baseline, double reference);
/// When higher is better (return): (reference - baseline) / baseline.
double improvement_higher_better(double reference, double baseline);

struct ImprovementRow {
    std::string family;
    std::string reference;
    std::string baseline;
    std::string setting;  // offline | online
    std::string metric;
    double reference_value = 0.0;
    double baseline_value = 0.0;
    double improvement = 0.0;
};

void write_improvement_table(const std::vector<ImprovementRow>& rows, const std::filesystem::path& path,
                             const std::string& config_hash);

/// Headline number of a series: suboptimality at the longest context,
/// final cumulative regret, or mean return over the last 10 episodes /
/// at the longest context for grids.
double headline(const MetricSeries& series);

// Pipeline stages. Paths are under config.output_dir.
std::filesystem::path cmd_generate(const ExperimentConfig& config);
std::filesystem::path cmd_train(const ExperimentConfig& config);
std::filesystem::path cmd_eval_offline(const ExperimentConfig& config);
std::filesystem::path cmd_eval_online(const ExperimentConfig& config);
/// axis in {trust_horizon, n_heads, n_layers}.
std::filesystem::path cmd_ablate(const ExperimentConfig& config, const std::string& axis,
                                 const std::vector<int>& values);
std::filesystem::path cmd_compare(const ExperimentConfig& config);

/// Process exit code for an error: 2 config, 3 missing artifact, 1 other.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace sad
