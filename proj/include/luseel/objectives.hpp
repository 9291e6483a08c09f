#pragma once

#include <torch/torch.h>

#include <utility>
#include <vector>

#include "luseel/audio.hpp"
#include "luseel/localization.hpp"

namespace luseel {

constexpr double kSiSnrClampDb = 60.0;

struct Resolution {
  int fft_size;
  int hop_size;
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

struct LossConfig {
  double gamma = 10.0;
  double sigma_sq = 5.0;
  std::vector<Resolution> freq_resolutions{{512, 128}, {1024, 256}, {2048, 512}};

  void validate() const;
};

// Differentiable losses on batched tensors [B x C x frames]. Each returns a
// per-item vector [B]; channels are averaged.

// Scale-invariant SNR in dB, clamped to [-60, 60]. Throws
// MetricUndefinedError when a reference channel is silent after mean removal.
torch::Tensor si_snr_tensor(const torch::Tensor& est, const torch::Tensor& ref);

// Plain SDR 10*log10(|ref|^2 / |est - ref|^2), clamped like si_snr.
torch::Tensor sdr_tensor(const torch::Tensor& est, const torch::Tensor& ref);

// L1 between magnitude spectra plus L1 between their first-order differences
// along time, on [B x C x F x T] magnitudes.
struct SpectralTerms {
  torch::Tensor magnitude;  // [B]
  torch::Tensor delta;      // [B]
};
SpectralTerms spectral_terms(const torch::Tensor& mag_est, const torch::Tensor& mag_ref);

// Multi-resolution delta-spectrum loss, unnormalized magnitudes (scale variant).
torch::Tensor freq_loss_tensor(const torch::Tensor& est, const torch::Tensor& ref,
                               const std::vector<Resolution>& resolutions);

// -si_snr + freq_loss.
torch::Tensor signal_loss_tensor(const torch::Tensor& est, const torch::Tensor& ref,
                                 const std::vector<Resolution>& resolutions);

// Sum over bins of squared differences; pred and label [B x N].
torch::Tensor doa_loss_tensor(const torch::Tensor& pred, const torch::Tensor& label);

inline double total_loss(double signal_loss, double mse_loss, double gamma) {
  return signal_loss + gamma * mse_loss;
}
inline torch::Tensor total_loss(const torch::Tensor& signal_loss, const torch::Tensor& mse_loss, double gamma) {
  return signal_loss + gamma * mse_loss;
}

// Waveform-level metrics in double precision.
double si_snr(const Waveform& est, const Waveform& ref);
double sdr(const Waveform& est, const Waveform& ref);
double freq_loss(const Waveform& est, const Waveform& ref, const std::vector<Resolution>& resolutions);
double signal_loss(const Waveform& est, const Waveform& ref, const std::vector<Resolution>& resolutions);
double doa_loss(const DoADistribution& pred, const DoADistribution& label);

// Improvement of the estimate over the unprocessed mixture, both in dB.
double si_snri(const Waveform& est, const Waveform& mix, const Waveform& ref);
double sdri(const Waveform& est, const Waveform& mix, const Waveform& ref);

struct DoaMetric {
  bool hit = false;
  double error_deg = 0.0;  // circular, in [0, 180]
};
DoaMetric doa_metrics(double pred_deg, double true_deg, double collar_deg = 5.0);

}  // namespace luseel
