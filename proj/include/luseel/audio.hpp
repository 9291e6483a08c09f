#pragma once

#include <torch/torch.h>

#include <vector>

namespace luseel {

constexpr int kDefaultSampleRate = 16000;

// Sampled audio, [channels x frames], one or two channels.
//
// Samples are kept in double precision; the network converts to float at
// its boundary. Construction validates shape, rate and finiteness.
class Waveform {
 public:
  Waveform(torch::Tensor samples, int sample_rate = kDefaultSampleRate);

  static Waveform zeros(int channels, int64_t frames, int sample_rate = kDefaultSampleRate);
  static Waveform from_vector(const std::vector<double>& mono, int sample_rate = kDefaultSampleRate);

  const torch::Tensor& samples() const { return samples_; }
  int sample_rate() const { return sample_rate_; }
  int channels() const { return static_cast<int>(samples_.size(0)); }
  int64_t frames() const { return samples_.size(1); }

  Waveform channel(int c) const;
  // Mean across channels.
  Waveform downmix() const;
  Waveform scaled(double gain) const;

 private:
  torch::Tensor samples_;
  int sample_rate_;
};

Waveform operator+(const Waveform& a, const Waveform& b);
Waveform operator-(const Waveform& a, const Waveform& b);

enum class WindowKind { Hann };

struct Spectrogram {
  torch::Tensor bins;  // complex [channels x fft_size/2+1 x time_frames]
  int fft_size = 0;
  int hop_size = 0;
  WindowKind window = WindowKind::Hann;

  int64_t freq_bins() const { return bins.size(1); }
  int64_t time_frames() const { return bins.size(2); }
};

// Number of STFT frames for `frames` samples under centre padding.
int64_t stft_frame_count(int64_t frames, int hop_size);

// Throws ConfigError unless fft_size is a positive power of two and
// 0 < hop_size <= fft_size.
void validate_stft_sizes(int fft_size, int hop_size);

// Throws ConfigError when overlap-added squared Hann windows vanish anywhere,
// i.e. when the inverse transform cannot reconstruct the signal.
void validate_reconstruction(int fft_size, int hop_size);

// Differentiable transforms on tensors of shape [..., frames]. The returned
// spectrum has shape [..., fft_size/2+1, time_frames]. Periodic Hann window,
// reflect centre padding.
torch::Tensor stft_tensor(const torch::Tensor& x, int fft_size, int hop_size);
torch::Tensor istft_tensor(const torch::Tensor& spec, int fft_size, int hop_size, int64_t length);

Spectrogram stft(const Waveform& w, int fft_size = 1024, int hop_size = 256);
Waveform istft(const Spectrogram& s, int64_t out_frames, int sample_rate = kDefaultSampleRate);

// Root-mean-square per channel.
std::vector<double> rms(const Waveform& w);

// RMS of the channel mean.
double downmix_rms(const Waveform& w);

// Gain g such that scaling `interferer` by g places it snr_db below `anchor`.
// Energy is measured on the channel mean. Throws DegenerateInputError when
// either signal is silent.
double gain_for_snr(const Waveform& anchor, const Waveform& interferer, double snr_db);

}  // namespace luseel
