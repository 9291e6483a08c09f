#pragma once

#include <filesystem>

#include "luseel/audio.hpp"

namespace luseel {

// Reads a 16-bit PCM RIFF wave file (mono or stereo) at its native rate.
Waveform read_wav(const std::filesystem::path& path);

// Reads and converts to `target_rate` with linear interpolation.
Waveform read_wav_resampled(const std::filesystem::path& path, int target_rate = kDefaultSampleRate);

// Writes 16-bit PCM; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& w);

// Linear-interpolation rate conversion; output length round(frames * to / from).
Waveform resample_linear(const Waveform& w, int target_rate);

}  // namespace luseel
