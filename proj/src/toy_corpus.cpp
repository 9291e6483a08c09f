#include "luseel/toy_corpus.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "json.hpp"
#include "luseel/errors.hpp"
#include "luseel/rng.hpp"
#include "luseel/wav_io.hpp"

namespace luseel {

namespace fs = std::filesystem;

namespace {

constexpr double kClipRms = 0.1;

torch::Tensor normalized(torch::Tensor x) { return x * (kClipRms / x.pow(2).mean().sqrt()); }

torch::Tensor band_noise(Rng& rng, int64_t frames, int sample_rate, double lo_hz, double hi_hz) {
  std::vector<double> white(static_cast<size_t>(frames));
  for (auto& v : white) v = rng.normal();
  auto spec = torch::fft::rfft(torch::tensor(white, torch::kFloat64));
  const auto freqs = torch::arange(spec.size(0), torch::kFloat64) * (static_cast<double>(sample_rate) / frames);
  spec = spec * (freqs >= lo_hz).logical_and(freqs <= hi_hz).to(torch::kFloat64);
  return normalized(torch::fft::irfft(spec, frames));
}

torch::Tensor harmonic_tone(Rng& rng, int64_t frames, int sample_rate, double f0, int harmonics) {
  const auto t = torch::arange(frames, torch::kFloat64) / static_cast<double>(sample_rate);
  auto x = torch::zeros({frames}, torch::kFloat64);
  for (int k = 1; k <= harmonics; ++k) {
    if (f0 * k >= 0.45 * sample_rate) break;
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    x = x + torch::sin(2.0 * std::numbers::pi * f0 * k * t + phase) / static_cast<double>(k);
  }
  return normalized(x);
}

}  // namespace

std::vector<ToyClip> make_toy_clips(int n_clips, uint64_t seed, double duration_s, int sample_rate,
                                    const std::string& id_prefix) {
  if (n_clips < 1) throw ConfigError("toy corpus: at least one clip required");
  const auto frames = static_cast<int64_t>(std::llround(duration_s * sample_rate));
  if (frames < 16) throw ConfigError("toy corpus: clips too short");
  Rng rng(seed);
  std::vector<ToyClip> clips;
  std::set<std::string> captions;
  const double nyquist = 0.5 * sample_rate;
  for (int i = 0; i < n_clips; ++i) {
    torch::Tensor audio;
    std::string caption;
    for (int attempt = 0; caption.empty() || captions.contains(caption); ++attempt) {
      if (attempt > 1000) throw ConfigError("toy corpus: cannot draw distinct captions");
      if (i % 2 == 0) {
        const double lo = std::round(rng.uniform(100.0, 0.6 * nyquist) / 50.0) * 50.0;
        const double width = std::round(rng.uniform(200.0, 0.3 * nyquist) / 50.0) * 50.0;
        const double hi = std::min(lo + width, 0.95 * nyquist);
        caption = "noise band from " + std::to_string(static_cast<int>(lo)) + " to " +
                  std::to_string(static_cast<int>(hi)) + " hz";
        audio = band_noise(rng, frames, sample_rate, lo, hi);
      } else {
        const double f0 = std::round(rng.uniform(110.0, 880.0));
        const int harmonics = 1 + static_cast<int>(rng.index(5));
        caption = "tone at " + std::to_string(static_cast<int>(f0)) + " hz with " + std::to_string(harmonics) +
                  " harmonics";
        audio = harmonic_tone(rng, frames, sample_rate, f0, harmonics);
      }
    }
    captions.insert(caption);
    const std::string id = id_prefix + "_" + std::to_string(i);
    clips.push_back(ToyClip{ClipRecord{id, id + ".wav", caption}, Waveform(audio.unsqueeze(0), sample_rate)});
  }
  return clips;
}

Corpus toy_corpus(const std::vector<ToyClip>& clips) {
  Corpus c;
  for (const auto& clip : clips) c.add(clip.record, clip.audio);
  return c;
}

fs::path write_toy_corpus(const fs::path& dir, const std::vector<ToyClip>& clips) {
  fs::create_directories(dir);
  const auto manifest = dir / "manifest.jsonl";
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw DataError("toy corpus: cannot write " + manifest.string());
  for (const auto& clip : clips) {
    write_wav(dir / clip.record.path, clip.audio);
    out << nlohmann::json{{"id", clip.record.id}, {"path", clip.record.path}, {"caption", clip.record.caption}}.dump()
        << "\n";
  }
  return manifest;
}

}  // namespace luseel
