#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "sad/model.hpp"

namespace sad {

struct CheckpointMeta {
    std::string config_hash;
    std::string family;
    std::string method;
    int epochs = 0;
    double final_loss = 0.0;
    std::string params_checksum;
};

/// Writes <dir>/model.bin (named tensor table: magic "SADTNSR1", count, then
/// per tensor name, rank, dims, element width and little-endian values) and
/// <dir>/manifest.json (model config plus training metadata).
template <typename T>
void save_checkpoint(const model::ModelParams<T>& params, const std::filesystem::path& dir,
                     const CheckpointMeta& meta);

/// Reads a checkpoint written with either element width; values are
/// converted to T. Throws missing_artifact if either file is absent.
template <typename T>
model::ModelParams<T> load_checkpoint(const std::filesystem::path& dir, CheckpointMeta* meta = nullptr);

}  // namespace sad
