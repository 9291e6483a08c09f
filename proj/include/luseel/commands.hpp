#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "luseel/evaluate.hpp"
#include "luseel/report.hpp"
#include "luseel/trainer.hpp"

namespace luseel {

namespace fs = std::filesystem;

struct SimulateArgs {
  fs::path config;
  fs::path out;
  std::string split = "val";  // "val" or "train": which manifest to draw from
  int count = -1;             // -1 uses train.val_scenes
};
// Freezes a scene set; returns the number of scenes written.
size_t cmd_simulate(const SimulateArgs& args);

struct TrainArgs {
  fs::path config;
  fs::path out_dir;  // empty uses train.out_dir
};
TrainResult cmd_train(const TrainArgs& args, std::ostream& log);

struct EvaluateArgs {
  fs::path checkpoint;
  fs::path scenes;
  fs::path out;
  fs::path manifest;  // empty uses the checkpoint's val manifest
  fs::path doa_out;   // empty uses <out>.doa.jsonl
};
EvalResult cmd_evaluate(const EvaluateArgs& args);

struct InferArgs {
  fs::path checkpoint;
  fs::path wav;
  std::string prompt;
  fs::path out;  // estimate wave file; ignored for localization-only systems
  fs::path doa;  // DoA JSON; ignored for extraction-only systems
};
void cmd_infer(const InferArgs& args);

struct ReportArgs {
  std::vector<fs::path> rows;
  fs::path out_dir;
};
ReportFiles cmd_report(const ReportArgs& args);

struct ToyCorpusArgs {
  fs::path out_dir;
  int train_clips = 24;
  int val_clips = 12;
  uint64_t seed = 0;
  double duration_s = 1.0;
};
// Writes train/ and val/ corpora plus a toy config.json referencing them.
fs::path cmd_make_toy_corpus(const ToyCorpusArgs& args);

}  // namespace luseel
