#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "luseel/config.hpp"
#include "luseel/model.hpp"

namespace luseel {

struct CheckpointMeta {
  int64_t step = 0;
  int64_t epoch = 0;
  double best_val_loss = 0.0;
  uint64_t provider_fingerprint = 0;
};

// A checkpoint is a directory holding config.json, meta.json and weights.pt
// (every named parameter and buffer of the model).
void save_checkpoint(const std::filesystem::path& dir, LuseelModel& model, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  ExperimentConfig config;
  LuseelModel model{nullptr};
  CheckpointMeta meta;
};
// Throws DataError on a missing or inconsistent checkpoint.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

// Names of the tensors stored in a checkpoint, sorted.
std::vector<std::string> checkpoint_tensor_names(const std::filesystem::path& dir);

}  // namespace luseel
