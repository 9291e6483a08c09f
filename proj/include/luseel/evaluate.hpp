#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "luseel/audio.hpp"
#include "luseel/conditioning.hpp"
#include "luseel/model.hpp"
#include "luseel/scene.hpp"

namespace luseel {

// One CSV row per scene. Extraction columns are empty for localization-only
// systems and localization columns for extraction-only systems.
struct MetricRow {
  std::string variant;
  std::string scene_id;
  int n_sources = 0;
  double sep_angle_deg = 0.0;
  std::optional<double> si_snri;
  std::optional<double> sdri;
  std::optional<bool> doa_hit;
  std::optional<double> mae;
};

struct DoaRecord {
  std::string scene_id;
  double true_deg = 0.0;
  double pred_deg = 0.0;
  int probs_argmax = 0;
  double mae_deg = 0.0;
};

// Scores one scene from whatever outputs the system produced.
MetricRow score_scene(const std::string& variant, const SceneSpec& spec, const std::optional<Waveform>& estimate,
                      const Waveform& mixture, const Waveform& reference, std::optional<double> pred_deg,
                      double true_deg);

struct EvalResult {
  std::vector<MetricRow> rows;
  std::vector<DoaRecord> doa;
};

EvalResult evaluate(LuseelModel& model, const EmbeddingProvider& provider, const std::vector<SceneSpec>& scenes,
                    const Corpus& corpus, const Renderer& renderer);

struct MetricSummary {
  size_t scenes = 0;
  std::optional<double> si_snri;
  std::optional<double> sdri;
  std::optional<double> doa_acc;  // fraction in [0, 1]
  std::optional<double> mae;
};
MetricSummary summarize(const std::vector<MetricRow>& rows);

void write_rows_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_rows_csv(const std::filesystem::path& path);
void write_doa_jsonl(const std::filesystem::path& path, const std::vector<DoaRecord>& records);

// Fixed-precision rendering used by every CSV writer.
std::string format_number(double v);

}  // namespace luseel
