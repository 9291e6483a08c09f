#pragma once

#include <torch/torch.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include "luseel/audio.hpp"
#include "luseel/rng.hpp"
#include "luseel/scene.hpp"

namespace luseel::testing {

inline Waveform white_noise(int64_t frames, uint64_t seed, int channels = 1, double scale = 0.1) {
  auto gen = at::detail::createCPUGenerator(seed);
  return Waveform(torch::randn({channels, frames}, gen, torch::kFloat64) * scale);
}

inline Waveform sine(double hz, int64_t frames, double amp = 0.5, int rate = kDefaultSampleRate) {
  auto n = torch::arange(frames, torch::kFloat64);
  return Waveform((amp * torch::sin(2.0 * std::numbers::pi * hz * n / rate)).unsqueeze(0), rate);
}

// In-memory corpus of distinct noise clips with one-word captions.
inline Corpus noise_corpus(int n_clips, int64_t frames, uint64_t seed = 7) {
  Corpus c;
  for (int i = 0; i < n_clips; ++i) {
    const std::string id = "clip" + std::to_string(i);
    c.add(ClipRecord{id, "", "sound" + std::to_string(i)}, white_noise(frames, seed + i));
  }
  return c;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / ("luseel_test_" + name);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace luseel::testing
