#include "luseel/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <regex>
#include <sstream>

#include "luseel/errors.hpp"
#include "luseel/wav_io.hpp"

namespace luseel {

using nlohmann::json;

Corpus::Corpus() : cache_(std::make_shared<Cache>()) {}

Corpus Corpus::from_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("corpus: cannot open manifest " + manifest.string());
  Corpus corpus;
  const auto base = manifest.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("corpus: " + manifest.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("id") || !j.contains("path") || !j.contains("caption")) {
      throw DataError("corpus: " + manifest.string() + ":" + std::to_string(line_no) +
                      ": record needs id, path and caption");
    }
    ClipRecord rec{j.at("id").get<std::string>(), j.at("path").get<std::string>(),
                   j.at("caption").get<std::string>()};
    std::filesystem::path p(rec.path);
    if (p.is_relative()) rec.path = (base / p).string();
    corpus.add(std::move(rec));
  }
  return corpus;
}

void Corpus::add(ClipRecord record, std::optional<Waveform> audio) {
  if (index_.contains(record.id)) throw DataError("corpus: duplicate clip id " + record.id);
  if (audio) {
    std::lock_guard lock(cache_->mutex);
    cache_->clips.insert_or_assign(record.id, audio->downmix());
  }
  index_.emplace(record.id, records_.size());
  records_.push_back(std::move(record));
}

const ClipRecord& Corpus::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("corpus: unknown clip id " + id);
  return records_[it->second];
}

Waveform Corpus::load_mono(const std::string& id, int sample_rate, int64_t frames) const {
  const ClipRecord& rec = find(id);
  std::optional<Waveform> clip;
  {
    std::lock_guard lock(cache_->mutex);
    if (auto it = cache_->clips.find(id); it != cache_->clips.end()) clip = it->second;
  }
  if (!clip) {
    clip = read_wav(rec.path).downmix();
    std::lock_guard lock(cache_->mutex);
    cache_->clips.insert_or_assign(id, *clip);
  }
  Waveform mono = resample_linear(*clip, sample_rate);
  auto s = mono.samples();
  if (s.size(1) >= frames) {
    s = s.slice(1, 0, frames);
  } else {
    s = torch::constant_pad_nd(s, {0, frames - s.size(1)});
  }
  return Waveform(s.clone(), sample_rate);
}

int64_t SceneSpec::frames() const { return std::llround(duration_s * sample_rate); }

double circular_distance_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

void SceneSpec::validate(double min_separation_deg) const {
  if (sources.size() < 2 || sources.size() > 3) throw InputError("scene: 2 or 3 sources required");
  if (target_index < 0 || target_index >= static_cast<int>(sources.size())) {
    throw InputError("scene: target index out of range");
  }
  if (duration_s <= 0.0 || sample_rate <= 0) throw InputError("scene: bad duration or sample rate");
  for (size_t i = 0; i < sources.size(); ++i) {
    const auto& s = sources[i];
    if (!(s.azimuth_deg >= 0.0 && s.azimuth_deg < 360.0)) throw InputError("scene: azimuth outside [0, 360)");
    if (static_cast<int>(i) == target_index && s.snr_db != 0.0) {
      throw InputError("scene: anchor snr_db must be 0");
    }
    for (size_t k = 0; k < i; ++k) {
      if (circular_distance_deg(s.azimuth_deg, sources[k].azimuth_deg) < min_separation_deg ||
          s.azimuth_deg == sources[k].azimuth_deg) {
        throw InputError("scene: sources closer than the minimum separation");
      }
    }
  }
}

void to_json(json& j, const SourceSpec& s) {
  j = json{{"clip_id", s.clip_id}, {"azimuth_deg", s.azimuth_deg}, {"snr_db", s.snr_db}, {"caption", s.caption}};
}

void from_json(const json& j, SourceSpec& s) {
  j.at("clip_id").get_to(s.clip_id);
  j.at("azimuth_deg").get_to(s.azimuth_deg);
  j.at("snr_db").get_to(s.snr_db);
  j.at("caption").get_to(s.caption);
}

void to_json(json& j, const SceneSpec& s) {
  j = json{{"scene_id", s.id},         {"sources", s.sources},         {"target_index", s.target_index},
           {"seed", s.seed},           {"duration_s", s.duration_s}, {"sample_rate", s.sample_rate}};
}

void from_json(const json& j, SceneSpec& s) {
  j.at("scene_id").get_to(s.id);
  j.at("sources").get_to(s.sources);
  j.at("target_index").get_to(s.target_index);
  j.at("seed").get_to(s.seed);
  j.at("duration_s").get_to(s.duration_s);
  j.at("sample_rate").get_to(s.sample_rate);
}

void write_scene_set(const std::filesystem::path& path, const std::vector<SceneSpec>& scenes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("scene set: cannot write " + path.string());
  for (const auto& s : scenes) out << json(s).dump() << '\n';
}

std::vector<SceneSpec> read_scene_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("scene set: cannot open " + path.string());
  std::vector<SceneSpec> scenes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      scenes.push_back(json::parse(line).get<SceneSpec>());
    } catch (const json::exception& e) {
      throw DataError("scene set: " + path.string() + ": " + e.what());
    }
    scenes.back().validate();
  }
  return scenes;
}

SceneSpec sample_scene(Rng& rng, const Corpus& corpus, int n_sources, const SamplingConfig& cfg) {
  if (n_sources < 2 || n_sources > 3) throw ConfigError("sample_scene: n_sources must be 2 or 3");
  if (corpus.size() < static_cast<size_t>(n_sources)) {
    throw ConfigError("sample_scene: corpus has fewer clips than sources");
  }
  if (cfg.min_separation_deg * n_sources >= 360.0) throw ConfigError("sample_scene: separation unsatisfiable");

  SceneSpec spec;
  spec.duration_s = cfg.duration_s;
  spec.sample_rate = cfg.sample_rate;

  // Partial Fisher-Yates for distinct clips.
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int i = 0; i < n_sources; ++i) {
    const size_t j = i + rng.index(order.size() - i);
    std::swap(order[i], order[j]);
  }
  spec.target_index = static_cast<int>(rng.index(n_sources));

  std::vector<double> azimuths;
  while (static_cast<int>(azimuths.size()) < n_sources) {
    const double az = rng.uniform(0.0, 360.0);
    const bool ok = std::all_of(azimuths.begin(), azimuths.end(), [&](double other) {
      return circular_distance_deg(az, other) >= cfg.min_separation_deg;
    });
    if (ok) azimuths.push_back(az);
  }

  for (int i = 0; i < n_sources; ++i) {
    const ClipRecord& rec = corpus.at(order[i]);
    SourceSpec s{rec.id, azimuths[i], 0.0, rec.caption};
    if (i != spec.target_index) s.snr_db = rng.uniform(cfg.snr_low_db, cfg.snr_high_db);
    spec.sources.push_back(std::move(s));
  }
  return spec;
}

double itd_seconds(double azimuth_deg, double head_radius_m, double speed_of_sound) {
  const double az = azimuth_deg * std::numbers::pi / 180.0;
  // Lateral angle folded into [-pi/2, pi/2]; front and back mirror images share it.
  const double lateral = std::asin(std::clamp(std::sin(az), -1.0, 1.0));
  return (head_radius_m / speed_of_sound) * (lateral + std::sin(lateral));
}

double ild_db(double azimuth_deg, double max_db) {
  return max_db * std::sin(azimuth_deg * std::numbers::pi / 180.0);
}

std::vector<double> fractional_delay(const std::vector<double>& x, double delay_samples, int half_width) {
  const auto n = static_cast<int64_t>(x.size());
  std::vector<double> y(x.size(), 0.0);
  const double whole = std::floor(delay_samples);
  const double frac = delay_samples - whole;
  const auto shift = static_cast<int64_t>(whole);
  if (frac == 0.0) {
    for (int64_t i = 0; i < n; ++i) {
      const int64_t src = i - shift;
      if (src >= 0 && src < n) y[i] = x[src];
    }
    return y;
  }

  // Taps h[k] for k in [shift - half_width + 1, shift + half_width].
  std::vector<double> taps;
  std::vector<int64_t> lags;
  double sum = 0.0;
  for (int64_t k = shift - half_width + 1; k <= shift + half_width; ++k) {
    const double t = static_cast<double>(k) - delay_samples;
    const double sinc = std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
    const double win = 0.5 * (1.0 + std::cos(std::numbers::pi * t / half_width));
    taps.push_back(sinc * win);
    lags.push_back(k);
    sum += sinc * win;
  }
  for (auto& h : taps) h /= sum;

  for (int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (size_t t = 0; t < taps.size(); ++t) {
      const int64_t src = i - lags[t];
      if (src >= 0 && src < n) acc += taps[t] * x[src];
    }
    y[i] = acc;
  }
  return y;
}

HrirSet HrirSet::from_directory(const std::filesystem::path& dir, int sample_rate) {
  if (!std::filesystem::is_directory(dir)) throw DataError("hrir: not a directory: " + dir.string());
  HrirSet set;
  const std::regex name(R"(az_(\d+)\.wav)");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string fname = entry.path().filename().string();
    if (!std::regex_match(fname, m, name)) continue;
    Waveform ir = read_wav_resampled(entry.path(), sample_rate);
    if (ir.channels() != 2) throw DataError("hrir: " + fname + " is not stereo");
    set.add(std::stoi(m[1].str()) % 360, ir);
  }
  if (set.empty()) throw DataError("hrir: no az_<degrees>.wav files in " + dir.string());
  return set;
}

void HrirSet::add(int azimuth_deg, Waveform stereo_ir) {
  if (stereo_ir.channels() != 2) throw DataError("hrir: impulse response must be stereo");
  irs_.insert_or_assign(((azimuth_deg % 360) + 360) % 360, std::move(stereo_ir));
}

const Waveform& HrirSet::nearest(double azimuth_deg) const {
  if (irs_.empty()) throw DataError("hrir: no impulse responses loaded");
  const Waveform* best = nullptr;
  double best_dist = 1e9;
  for (const auto& [az, ir] : irs_) {
    const double d = circular_distance_deg(az, azimuth_deg);
    if (d < best_dist) {
      best_dist = d;
      best = &ir;
    }
  }
  return *best;
}

Renderer Renderer::from_hrirs(std::shared_ptr<const HrirSet> set) {
  Renderer r;
  r.kind = Kind::HrirSet;
  r.hrirs = std::move(set);
  return r;
}

namespace {

std::vector<double> to_vector(const torch::Tensor& row) {
  auto c = row.contiguous();
  return std::vector<double>(c.data_ptr<double>(), c.data_ptr<double>() + c.numel());
}

std::vector<double> convolve_truncated(const std::vector<double>& x, const torch::Tensor& ir_row) {
  const auto h = to_vector(ir_row);
  std::vector<double> y(x.size(), 0.0);
  for (size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    const size_t kmax = std::min(h.size(), n + 1);
    for (size_t k = 0; k < kmax; ++k) acc += h[k] * x[n - k];
    y[n] = acc;
  }
  return y;
}

Waveform stereo_from(const std::vector<double>& left, const std::vector<double>& right, int sample_rate) {
  auto l = torch::tensor(left, torch::kFloat64);
  auto r = torch::tensor(right, torch::kFloat64);
  return Waveform(torch::stack({l, r}), sample_rate);
}

}  // namespace

Waveform spatialize(const Waveform& mono, double azimuth_deg, const Renderer& renderer) {
  if (mono.channels() != 1) throw InputError("spatialize: mono input required");
  const auto x = to_vector(mono.samples()[0]);

  if (renderer.kind == Renderer::Kind::HrirSet) {
    if (!renderer.hrirs) throw DataError("spatialize: renderer has no HRIR set");
    const Waveform& ir = renderer.hrirs->nearest(azimuth_deg);
    return stereo_from(convolve_truncated(x, ir.samples()[0]), convolve_truncated(x, ir.samples()[1]),
                       mono.sample_rate());
  }

  const double itd = itd_seconds(azimuth_deg, renderer.head.radius_m, renderer.head.speed_of_sound);
  const double delay = std::abs(itd) * mono.sample_rate();
  const double level = ild_db(azimuth_deg, renderer.ild_max_db);
  const double gain_right = std::pow(10.0, level / 40.0);
  const double gain_left = 1.0 / gain_right;

  // The far ear receives the delayed copy.
  std::vector<double> left = itd > 0.0 ? fractional_delay(x, delay) : x;
  std::vector<double> right = itd < 0.0 ? fractional_delay(x, delay) : x;
  for (auto& v : left) v *= gain_left;
  for (auto& v : right) v *= gain_right;
  return stereo_from(left, right, mono.sample_rate());
}

BinauralScene render_scene(const SceneSpec& spec, const Corpus& corpus, const Renderer& renderer) {
  spec.validate();
  const int64_t frames = spec.frames();
  const Waveform anchor = corpus.load_mono(spec.target().clip_id, spec.sample_rate, frames);
  if (!(downmix_rms(anchor) > 0.0)) throw DegenerateInputError("render_scene: silent anchor clip");

  std::vector<Waveform> mono;
  std::vector<Waveform> binaural;
  for (size_t i = 0; i < spec.sources.size(); ++i) {
    const auto& src = spec.sources[i];
    if (static_cast<int>(i) == spec.target_index) {
      mono.push_back(anchor);
    } else {
      Waveform clip = corpus.load_mono(src.clip_id, spec.sample_rate, frames);
      mono.push_back(clip.scaled(gain_for_snr(anchor, clip, src.snr_db)));
    }
    binaural.push_back(spatialize(mono.back(), src.azimuth_deg, renderer));
  }

  auto sum = torch::zeros_like(binaural.front().samples());
  for (const auto& b : binaural) sum += b.samples();
  const Waveform& target = binaural[static_cast<size_t>(spec.target_index)];
  return BinauralScene{Waveform(sum, spec.sample_rate), target, spec.target().azimuth_deg,
                       TextPrompt(spec.target().caption), std::move(mono), std::move(binaural)};
}

SimulatedScene simulate_scene(uint64_t seed, const Corpus& corpus, int n_sources, const SamplingConfig& cfg,
                              const Renderer& renderer, int max_attempts) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const uint64_t s = attempt == 0 ? seed : derive_seed(seed, static_cast<uint64_t>(attempt));
    Rng rng(s);
    SceneSpec spec = sample_scene(rng, corpus, n_sources, cfg);
    spec.seed = s;
    try {
      BinauralScene scene = render_scene(spec, corpus, renderer);
      return SimulatedScene{std::move(spec), std::move(scene)};
    } catch (const DegenerateInputError&) {
      continue;
    }
  }
  throw DegenerateInputError("simulate_scene: no renderable scene after repeated resampling");
}

double target_separation_deg(const SceneSpec& spec) {
  const double t = spec.target().azimuth_deg;
  double best = 180.0;
  for (size_t i = 0; i < spec.sources.size(); ++i) {
    if (static_cast<int>(i) == spec.target_index) continue;
    best = std::min(best, circular_distance_deg(t, spec.sources[i].azimuth_deg));
  }
  return best;
}

}  // namespace luseel
