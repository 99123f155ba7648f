#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sad/env.hpp"

namespace sad {

/// Ordered transitions conditioning the model. Not necessarily episodic.
struct Context {
    std::vector<Transition> transitions;

    std::size_t size() const noexcept { return transitions.size(); }
    bool empty() const noexcept { return transitions.empty(); }
    bool operator==(const Context&) const = default;
};

enum class Method { SAD, AD, DPT_random, DIT };

std::string_view to_string(Method m) noexcept;
Method parse_method(std::string_view s);

struct PretrainSample {
    Context context;
    StateVec query_state;
    ActionId action_label;
    double weight = 1.0;
    std::string env_tag;
    Method method = Method::SAD;
    std::uint64_t seed = 0;

    bool operator==(const PretrainSample&) const = default;
};

struct DatagenConfig {
    Method method = Method::SAD;
    int trust_horizon = 1000;
    int context_len = 100;
    double gamma = 0.99;
    std::int64_t dataset_size = 0;
    double dit_temperature = 0.3;
    /// Episodes per AD learning history.
    int ad_episodes = 3;
    /// Query resamples before the sparse distiller gives up.
    std::int64_t max_resamples = 1'000'000;

    bool operator==(const DatagenConfig&) const = default;
};

struct Dataset {
    DatagenConfig config;
    EnvSpec env_spec;
    Split split = Split::train;
    std::uint64_t master_seed = 0;
    std::string config_hash;
    std::vector<PretrainSample> samples;

    bool operator==(const Dataset&) const = default;
};

/// Line-oriented JSON: a header record carrying config, env spec, split,
/// seed and config hash, then one record per sample with fields
/// {context: [[s, a, r, s'], ...], query_state, action_label, weight,
/// env_tag, method, seed}. Doubles are written in shortest round-trip form,
/// so write then read reproduces the dataset bit for bit.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);
std::string dataset_to_string(const Dataset& dataset);
Dataset dataset_from_string(std::string_view text);

}  // namespace sad
