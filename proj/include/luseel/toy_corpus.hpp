#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "luseel/audio.hpp"
#include "luseel/scene.hpp"

namespace luseel {

struct ToyClip {
  ClipRecord record;
  Waveform audio;
};

// Synthetic captioned clips alternating band-limited noise and harmonic
// tones, each with a distinct caption and RMS 0.1.
std::vector<ToyClip> make_toy_clips(int n_clips, uint64_t seed, double duration_s = 1.0,
                                    int sample_rate = kDefaultSampleRate, const std::string& id_prefix = "clip");

// In-memory corpus over the clips.
Corpus toy_corpus(const std::vector<ToyClip>& clips);

// Writes <dir>/<id>.wav and <dir>/manifest.jsonl; returns the manifest path.
std::filesystem::path write_toy_corpus(const std::filesystem::path& dir, const std::vector<ToyClip>& clips);

}  // namespace luseel
