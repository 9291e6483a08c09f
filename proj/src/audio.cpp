#include "luseel/audio.hpp"

#include <cmath>
#include <string>

#include "luseel/errors.hpp"

namespace luseel {

Waveform::Waveform(torch::Tensor samples, int sample_rate) : sample_rate_(sample_rate) {
  if (sample_rate <= 0) throw InputError("Waveform: sample rate must be positive");
  if (samples.dim() == 1) samples = samples.unsqueeze(0);
  if (samples.dim() != 2) throw InputError("Waveform: expected [channels x frames]");
  if (samples.size(0) < 1 || samples.size(0) > 2) {
    throw InputError("Waveform: channels must be 1 or 2, got " + std::to_string(samples.size(0)));
  }
  if (samples.size(1) < 1) throw InputError("Waveform: at least one frame required");
  samples_ = samples.detach().to(torch::kFloat64).contiguous();
  if (!torch::isfinite(samples_).all().item<bool>()) {
    throw InputError("Waveform: non-finite sample values");
  }
}

Waveform Waveform::zeros(int channels, int64_t frames, int sample_rate) {
  return Waveform(torch::zeros({channels, frames}, torch::kFloat64), sample_rate);
}

Waveform Waveform::from_vector(const std::vector<double>& mono, int sample_rate) {
  auto t = torch::tensor(mono, torch::kFloat64).unsqueeze(0);
  return Waveform(t, sample_rate);
}

Waveform Waveform::channel(int c) const {
  if (c < 0 || c >= channels()) throw InputError("Waveform: channel index out of range");
  return Waveform(samples_.slice(0, c, c + 1).clone(), sample_rate_);
}

Waveform Waveform::downmix() const {
  return Waveform(samples_.mean(0, /*keepdim=*/true), sample_rate_);
}

Waveform Waveform::scaled(double gain) const { return Waveform(samples_ * gain, sample_rate_); }

namespace {

void check_compatible(const Waveform& a, const Waveform& b) {
  if (a.sample_rate() != b.sample_rate() || a.frames() != b.frames() ||
      a.channels() != b.channels()) {
    throw InputError("Waveform: operands differ in shape or sample rate");
  }
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

torch::Tensor hann(int fft_size, torch::Dtype dtype) {
  return torch::hann_window(fft_size, torch::TensorOptions().dtype(dtype));
}

torch::Dtype real_dtype_of(const torch::Tensor& t) {
  auto s = t.scalar_type();
  if (s == torch::kComplexDouble || s == torch::kFloat64) return torch::kFloat64;
  return torch::kFloat32;
}

}  // namespace

Waveform operator+(const Waveform& a, const Waveform& b) {
  check_compatible(a, b);
  return Waveform(a.samples() + b.samples(), a.sample_rate());
}

Waveform operator-(const Waveform& a, const Waveform& b) {
  check_compatible(a, b);
  return Waveform(a.samples() - b.samples(), a.sample_rate());
}

int64_t stft_frame_count(int64_t frames, int hop_size) { return frames / hop_size + 1; }

void validate_stft_sizes(int fft_size, int hop_size) {
  if (fft_size <= 0 || hop_size <= 0) throw ConfigError("stft: sizes must be positive");
  if (!is_power_of_two(fft_size)) throw ConfigError("stft: fft_size must be a power of two");
  if (hop_size > fft_size) throw ConfigError("stft: hop_size exceeds fft_size");
}

void validate_reconstruction(int fft_size, int hop_size) {
  validate_stft_sizes(fft_size, hop_size);
  auto w2 = hann(fft_size, torch::kFloat64).pow(2);
  auto acc = w2.accessor<double, 1>();
  double lo = std::numeric_limits<double>::infinity();
  for (int n = 0; n < hop_size; ++n) {
    double sum = 0.0;
    for (int k = n; k < fft_size; k += hop_size) sum += acc[k];
    lo = std::min(lo, sum);
  }
  if (lo < 1e-10) {
    throw ConfigError("istft: window/hop pair (" + std::to_string(fft_size) + ", " +
                      std::to_string(hop_size) + ") violates the overlap-add condition");
  }
}

torch::Tensor stft_tensor(const torch::Tensor& x, int fft_size, int hop_size) {
  validate_stft_sizes(fft_size, hop_size);
  if (x.size(-1) <= fft_size / 2) {
    throw InputError("stft: signal of " + std::to_string(x.size(-1)) +
                     " frames is too short for fft_size " + std::to_string(fft_size));
  }
  auto lead = x.sizes().vec();
  lead.pop_back();
  auto flat = x.reshape({-1, x.size(-1)});
  auto spec = torch::stft(flat, fft_size, hop_size, fft_size, hann(fft_size, real_dtype_of(x)),
                          /*center=*/true, "reflect", /*normalized=*/false, /*onesided=*/true,
                          /*return_complex=*/true);
  lead.push_back(spec.size(1));
  lead.push_back(spec.size(2));
  return spec.reshape(lead);
}

torch::Tensor istft_tensor(const torch::Tensor& spec, int fft_size, int hop_size, int64_t length) {
  validate_reconstruction(fft_size, hop_size);
  if (spec.size(-2) != fft_size / 2 + 1) throw ConfigError("istft: frequency axis mismatch");
  auto lead = spec.sizes().vec();
  lead.pop_back();
  lead.pop_back();
  auto flat = spec.reshape({-1, spec.size(-2), spec.size(-1)});
  auto y = torch::istft(flat, fft_size, hop_size, fft_size, hann(fft_size, real_dtype_of(spec)),
                        /*center=*/true, /*normalized=*/false, /*onesided=*/true, length);
  lead.push_back(length);
  return y.reshape(lead);
}

Spectrogram stft(const Waveform& w, int fft_size, int hop_size) {
  return Spectrogram{stft_tensor(w.samples(), fft_size, hop_size), fft_size, hop_size,
                     WindowKind::Hann};
}

Waveform istft(const Spectrogram& s, int64_t out_frames, int sample_rate) {
  if (out_frames < 1) throw ConfigError("istft: out_frames must be positive");
  return Waveform(istft_tensor(s.bins, s.fft_size, s.hop_size, out_frames), sample_rate);
}

std::vector<double> rms(const Waveform& w) {
  auto r = w.samples().pow(2).mean(1).sqrt();
  return std::vector<double>(r.data_ptr<double>(), r.data_ptr<double>() + r.numel());
}

double downmix_rms(const Waveform& w) { return rms(w.downmix()).front(); }

double gain_for_snr(const Waveform& anchor, const Waveform& interferer, double snr_db) {
  const double ra = downmix_rms(anchor);
  const double ri = downmix_rms(interferer);
  if (!(ra > 0.0)) throw DegenerateInputError("gain_for_snr: silent anchor");
  if (!(ri > 0.0)) throw DegenerateInputError("gain_for_snr: silent interferer");
  return (ra / ri) * std::pow(10.0, -snr_db / 20.0);
}

}  // namespace luseel
