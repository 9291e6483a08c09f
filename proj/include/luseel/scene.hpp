#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "luseel/audio.hpp"
#include "luseel/prompt.hpp"
#include "luseel/rng.hpp"

namespace luseel {

struct ClipRecord {
  std::string id;
  std::string path;
  std::string caption;
};

// Captioned clip collection. Clips are either registered in memory or
// loaded lazily from 16-bit wave files named in a JSON-lines manifest.
class Corpus {
 public:
  Corpus();

  // One record per line: {"id": str, "path": str, "caption": str}. Relative
  // paths resolve against the manifest directory.
  static Corpus from_manifest(const std::filesystem::path& manifest);

  void add(ClipRecord record, std::optional<Waveform> audio = std::nullopt);

  size_t size() const { return records_.size(); }
  const ClipRecord& at(size_t i) const { return records_.at(i); }
  const ClipRecord& find(const std::string& id) const;
  const std::vector<ClipRecord>& records() const { return records_; }

  // Mono clip at `sample_rate`, zero padded or cropped to `frames`.
  Waveform load_mono(const std::string& id, int sample_rate, int64_t frames) const;

 private:
  struct Cache {
    std::mutex mutex;
    std::map<std::string, Waveform> clips;
  };

  std::vector<ClipRecord> records_;
  std::map<std::string, size_t> index_;
  std::shared_ptr<Cache> cache_;
};

struct SourceSpec {
  std::string clip_id;
  double azimuth_deg = 0.0;
  double snr_db = 0.0;  // 0 for the anchor
  std::string caption;
};

struct SceneSpec {
  std::string id;
  std::vector<SourceSpec> sources;
  int target_index = 0;
  uint64_t seed = 0;
  double duration_s = 10.0;
  int sample_rate = kDefaultSampleRate;

  const SourceSpec& target() const { return sources.at(static_cast<size_t>(target_index)); }
  int64_t frames() const;
  // Throws InputError on any broken invariant.
  void validate(double min_separation_deg = 0.0) const;
};

void to_json(nlohmann::json& j, const SourceSpec& s);
void from_json(const nlohmann::json& j, SourceSpec& s);
void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);

void write_scene_set(const std::filesystem::path& path, const std::vector<SceneSpec>& scenes);
std::vector<SceneSpec> read_scene_set(const std::filesystem::path& path);

struct SamplingConfig {
  double min_separation_deg = 5.0;
  double snr_low_db = -5.0;
  double snr_high_db = 5.0;
  double duration_s = 10.0;
  int sample_rate = kDefaultSampleRate;
};

// Draws distinct clips, a uniformly chosen anchor, interferer SNRs uniform
// in [snr_low, snr_high] and azimuths uniform on [0, 360) with a minimum
// circular separation.
SceneSpec sample_scene(Rng& rng, const Corpus& corpus, int n_sources, const SamplingConfig& cfg = {});

// Circular distance in degrees, in [0, 180].
double circular_distance_deg(double a, double b);

struct HeadModel {
  double radius_m = 0.0875;
  double speed_of_sound = 343.0;
};

// Woodworth interaural time difference; positive when the source is on the
// right (right ear leads). Azimuth grows clockwise from the front.
double itd_seconds(double azimuth_deg, double head_radius_m = 0.0875, double speed_of_sound = 343.0);

// Interaural level difference in dB (right minus left), `max_db` at 90 degrees.
double ild_db(double azimuth_deg, double max_db = 6.0);

// Delays a mono signal by a possibly fractional number of samples with a
// Hann-windowed sinc interpolator. Length is preserved, the tail is dropped.
std::vector<double> fractional_delay(const std::vector<double>& x, double delay_samples, int half_width = 32);

// Stereo impulse responses keyed by integer azimuth.
class HrirSet {
 public:
  // Reads az_<degrees>.wav files (stereo, 16-bit).
  static HrirSet from_directory(const std::filesystem::path& dir, int sample_rate = kDefaultSampleRate);

  void add(int azimuth_deg, Waveform stereo_ir);
  bool empty() const { return irs_.empty(); }
  // Throws DataError when the set is empty.
  const Waveform& nearest(double azimuth_deg) const;

 private:
  std::map<int, Waveform> irs_;
};

struct Renderer {
  enum class Kind { Parametric, HrirSet };
  Kind kind = Kind::Parametric;
  HeadModel head;
  double ild_max_db = 6.0;
  std::shared_ptr<const HrirSet> hrirs;

  static Renderer parametric() { return Renderer{}; }
  static Renderer from_hrirs(std::shared_ptr<const HrirSet> set);
};

// Mono -> binaural at the given azimuth. Output length equals input length.
Waveform spatialize(const Waveform& mono, double azimuth_deg, const Renderer& renderer = {});

struct BinauralScene {
  Waveform mixture;  // 2 ch
  Waveform target;   // spatialized anchor
  double target_azimuth_deg = 0.0;
  TextPrompt prompt;
  // Gain-scaled mono sources before and after spatialization, in spec order.
  std::vector<Waveform> sources_mono;
  std::vector<Waveform> sources_binaural;
};

// Throws DegenerateInputError if any clip is silent.
BinauralScene render_scene(const SceneSpec& spec, const Corpus& corpus, const Renderer& renderer = {});

// Samples and renders, resampling (with a derived seed) whenever a scene is
// rejected for containing a silent clip.
struct SimulatedScene {
  SceneSpec spec;
  BinauralScene scene;
};
SimulatedScene simulate_scene(uint64_t seed, const Corpus& corpus, int n_sources,
                              const SamplingConfig& cfg = {}, const Renderer& renderer = {},
                              int max_attempts = 64);

// Nearest-interferer circular separation used for report binning.
double target_separation_deg(const SceneSpec& spec);

}  // namespace luseel
