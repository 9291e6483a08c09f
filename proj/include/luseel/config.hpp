#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "luseel/conditioning.hpp"
#include "luseel/extractor.hpp"
#include "luseel/localization.hpp"
#include "luseel/objectives.hpp"
#include "luseel/scene.hpp"

namespace luseel {

enum class Variant { THtdemucs, MlpGcc, LuseelDagger, LuseelCircle, Luseel };

struct VariantTraits {
  int channels = 2;
  bool extraction = true;
  bool localization = true;
  bool use_gcc = true;

  std::string task() const;  // "Extraction", "Localization" or "Both"
};

VariantTraits traits(Variant v);
std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();

struct DataConfig {
  std::string train_manifest;
  std::string val_manifest;
  std::string hrir_dir;  // empty selects the parametric renderer
};

struct TextConfig {
  std::string provider = "toy_hash";  // or "pretrained_adapter"
  uint64_t provider_seed = 0;
  std::string sidecar;
  ProjectionConfig projection;
};

struct TrainConfig {
  int batch_size = 4;
  double lr = 1e-3;
  int64_t warmup_steps = 100;
  double weight_decay = 0.01;
  int64_t steps_per_epoch = 50;
  int plateau_patience_epochs = 6;
  int early_stop_epochs = 10;
  int accum_steps = 1;
  int64_t max_epochs = 100;
  int64_t max_steps = 0;        // 0 = unbounded
  int fixed_train_scenes = 0;   // 0 = fresh scenes every step
  int val_scenes = 16;
  int num_workers = 1;
  std::string out_dir = "runs/default";
};

struct ExperimentConfig {
  Variant variant = Variant::Luseel;
  int n_sources = 2;
  uint64_t seed = 0;
  bool toy_scale = true;

  DataConfig data;
  SamplingConfig sampling;
  HeadModel head;
  double ild_max_db = 6.0;
  TextConfig text;
  ExtractorConfig extractor;
  LocalizationConfig localization;
  LossConfig loss;
  TrainConfig train;

  VariantTraits traits() const { return luseel::traits(variant); }

  // Copies variant and text widths into the extractor and localization
  // sections and checks every section. Throws ConfigError.
  void finalize();

  static ExperimentConfig toy(Variant v = Variant::Luseel, int n_sources = 2);
  static ExperimentConfig full_scale(Variant v = Variant::Luseel, int n_sources = 2);

  // Missing keys keep the preset named by "toy_scale" (default true).
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;
};

// LUSEEL_SEED, when set to an unsigned integer, replaces the config seed.
// Throws ConfigError on a malformed value.
void apply_seed_override(ExperimentConfig& cfg);

}  // namespace luseel
