#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sad/dataset.hpp"
#include "sad/model.hpp"

namespace sad {

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 64;
    int epochs = 1;
    std::uint64_t shuffle_seed = 0;
    std::uint64_t init_seed = 0;
    /// Global gradient-norm clip; <= 0 disables clipping.
    double grad_clip = 1.0;
    /// Per-sample gradients are computed on this many threads and combined
    /// by a fixed pairwise tree, so the result does not depend on it.
    int threads = 1;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct TrainReport {
    std::vector<double> epoch_loss;
    double wall_seconds = 0.0;
    std::string params_checksum;
};

struct TrainResult {
    model::ModelParams<float> params;
    TrainReport report;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Adam on the weighted NLL. Epoch e shuffles with RngStream(shuffle_seed, e).
TrainResult train(const Dataset& dataset, const model::ModelConfig& model_config, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Continues from existing parameters.
TrainResult train_from(model::ModelParams<float> params, const Dataset& dataset, const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

/// Mean weighted NLL over the dataset, no updates.
double evaluate_loss(const model::ModelParams<float>& params, const Dataset& dataset, int threads = 1);

/// FNV-1a 64 over names, shapes and raw little-endian values, as hex.
std::string params_checksum(const model::ModelParams<float>& params);

/// Columns epoch, mean_loss; preceded by a "# config_hash=..." line when a hash is given.
void write_train_report(const TrainReport& report, const std::filesystem::path& path,
                        const std::string& config_hash);

}  // namespace sad
