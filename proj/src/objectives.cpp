#include "luseel/objectives.hpp"

#include <cmath>

#include "luseel/errors.hpp"
#include "luseel/scene.hpp"

namespace luseel {

namespace {

constexpr double kTiny = 1e-20;

void check_pair(const torch::Tensor& est, const torch::Tensor& ref) {
  if (est.sizes() != ref.sizes() || est.dim() != 3) {
    throw InputError("loss: estimate and reference must share a [B x C x frames] shape");
  }
}

torch::Tensor batched(const Waveform& w) { return w.samples().unsqueeze(0); }

torch::Tensor magnitude(const torch::Tensor& x, const Resolution& r) {
  auto spec = stft_tensor(x, r.fft_size, r.hop_size);
  return (torch::real(spec).pow(2) + torch::imag(spec).pow(2) + 1e-12).sqrt();
}

}  // namespace

void LossConfig::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("loss: gamma must be non-negative");
  if (!(sigma_sq > 0.0)) throw ConfigError("loss: sigma_sq must be positive");
  if (freq_resolutions.empty()) throw ConfigError("loss: at least one STFT resolution required");
  for (const auto& r : freq_resolutions) validate_stft_sizes(r.fft_size, r.hop_size);
}

torch::Tensor si_snr_tensor(const torch::Tensor& est, const torch::Tensor& ref) {
  check_pair(est, ref);
  auto e = est - est.mean(-1, true);
  auto r = ref - ref.mean(-1, true);
  auto ref_energy = r.pow(2).sum(-1, true);
  if ((ref_energy <= 0).any().item<bool>()) throw MetricUndefinedError("si_snr: silent reference");
  auto target = (e * r).sum(-1, true) / ref_energy * r;
  auto noise = e - target;
  auto ratio = (target.pow(2).sum(-1) + kTiny) / (noise.pow(2).sum(-1) + kTiny);
  auto db = 10.0 * torch::log10(ratio);
  return torch::clamp(db, -kSiSnrClampDb, kSiSnrClampDb).mean(-1);
}

torch::Tensor sdr_tensor(const torch::Tensor& est, const torch::Tensor& ref) {
  check_pair(est, ref);
  auto ref_energy = ref.pow(2).sum(-1);
  if ((ref_energy <= 0).any().item<bool>()) throw MetricUndefinedError("sdr: silent reference");
  auto ratio = (ref_energy + kTiny) / ((est - ref).pow(2).sum(-1) + kTiny);
  return torch::clamp(10.0 * torch::log10(ratio), -kSiSnrClampDb, kSiSnrClampDb).mean(-1);
}

SpectralTerms spectral_terms(const torch::Tensor& mag_est, const torch::Tensor& mag_ref) {
  if (mag_est.sizes() != mag_ref.sizes() || mag_est.dim() != 4) {
    throw InputError("spectral_terms: expected matching [B x C x F x T] magnitudes");
  }
  auto mag = (mag_est - mag_ref).abs().mean({1, 2, 3});
  torch::Tensor delta;
  if (mag_est.size(3) > 1) {
    auto d_est = mag_est.diff(1, 3);
    auto d_ref = mag_ref.diff(1, 3);
    delta = (d_est - d_ref).abs().mean({1, 2, 3});
  } else {
    delta = torch::zeros_like(mag);
  }
  return SpectralTerms{mag, delta};
}

torch::Tensor freq_loss_tensor(const torch::Tensor& est, const torch::Tensor& ref,
                               const std::vector<Resolution>& resolutions) {
  check_pair(est, ref);
  if (resolutions.empty()) throw ConfigError("freq_loss: at least one STFT resolution required");
  torch::Tensor total;
  for (const auto& r : resolutions) {
    auto terms = spectral_terms(magnitude(est, r), magnitude(ref, r));
    auto part = terms.magnitude + terms.delta;
    total = total.defined() ? total + part : part;
  }
  return total;
}

torch::Tensor signal_loss_tensor(const torch::Tensor& est, const torch::Tensor& ref,
                                 const std::vector<Resolution>& resolutions) {
  return -si_snr_tensor(est, ref) + freq_loss_tensor(est, ref, resolutions);
}

torch::Tensor doa_loss_tensor(const torch::Tensor& pred, const torch::Tensor& label) {
  if (pred.sizes() != label.sizes() || pred.dim() != 2) {
    throw InputError("doa_loss: expected matching [B x N] distributions");
  }
  return (pred - label).pow(2).sum(1);
}

double si_snr(const Waveform& est, const Waveform& ref) {
  return si_snr_tensor(batched(est), batched(ref)).item<double>();
}

double sdr(const Waveform& est, const Waveform& ref) { return sdr_tensor(batched(est), batched(ref)).item<double>(); }

double freq_loss(const Waveform& est, const Waveform& ref, const std::vector<Resolution>& resolutions) {
  return freq_loss_tensor(batched(est), batched(ref), resolutions).item<double>();
}

double signal_loss(const Waveform& est, const Waveform& ref, const std::vector<Resolution>& resolutions) {
  return signal_loss_tensor(batched(est), batched(ref), resolutions).item<double>();
}

double doa_loss(const DoADistribution& pred, const DoADistribution& label) {
  if (pred.probs.size() != label.probs.size()) throw InputError("doa_loss: bin count mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < pred.probs.size(); ++i) {
    const double d = pred.probs[i] - label.probs[i];
    sum += d * d;
  }
  return sum;
}

double si_snri(const Waveform& est, const Waveform& mix, const Waveform& ref) {
  return si_snr(est, ref) - si_snr(mix, ref);
}

double sdri(const Waveform& est, const Waveform& mix, const Waveform& ref) { return sdr(est, ref) - sdr(mix, ref); }

DoaMetric doa_metrics(double pred_deg, double true_deg, double collar_deg) {
  const double e = circular_distance_deg(pred_deg, true_deg);
  return DoaMetric{e <= collar_deg, e};
}

}  // namespace luseel
