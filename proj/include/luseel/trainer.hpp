#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "luseel/checkpoint.hpp"
#include "luseel/dataset.hpp"
#include "luseel/model.hpp"

namespace luseel {

// Per-item loss terms [B]; a term is zero where the variant drops it.
struct LossTerms {
  torch::Tensor total;
  torch::Tensor signal;
  torch::Tensor mse;
};

// L_signal for extraction variants, L_MSE for localization variants,
// L_signal + gamma * L_MSE when both are present.
LossTerms compute_loss(LuseelModelImpl& model, const ModelOutput& out, const Batch& batch);

struct StepRecord {
  int64_t step = 0;
  int64_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double signal = 0.0;
  double mse = 0.0;
};

struct EpochRecord {
  int64_t epoch = 0;
  int64_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double best_val_loss = 0.0;
  int epochs_since_improve = 0;
  int halvings = 0;
  bool improved = false;
  bool halved = false;
  bool stop = false;
};

struct TrainState {
  int64_t step = 0;
  int64_t epoch = 0;
  double lr_current = 0.0;
  double best_val_loss = 0.0;
  int epochs_since_improve = 0;
  std::filesystem::path best_checkpoint;
};

struct TrainOptions {
  // Fixed training scenes replayed in order; empty means cfg.train decides
  // (a frozen pool of fixed_train_scenes, or fresh scenes every step).
  std::vector<SceneSpec> train_scenes;
  // Validation scenes; empty means a frozen "val" set of cfg.train.val_scenes.
  std::vector<SceneSpec> val_scenes;
  // Directory for the best checkpoint and logs; empty writes nothing.
  std::filesystem::path out_dir;
  // Reload the best-validation weights into the model before returning.
  bool restore_best = true;
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  TrainState state;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  bool early_stopped = false;
};

// AdamW with warm-up and plateau halving, validation after every epoch of
// cfg.train.steps_per_epoch optimizer steps, early stopping. Throws
// NumericError on a non-finite loss.
TrainResult train(LuseelModel& model, const EmbeddingProvider& provider, const Corpus& train_corpus,
                  const Corpus& val_corpus, const TrainOptions& opts = {});

// Mean per-item validation loss over pre-rendered scenes, eval mode.
double validation_loss(LuseelModel& model, const EmbeddingProvider& provider,
                       const std::vector<BinauralScene>& scenes, int batch_size);

}  // namespace luseel
