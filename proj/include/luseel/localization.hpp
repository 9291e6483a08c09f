#pragma once

#include <torch/torch.h>

#include <vector>

#include "luseel/audio.hpp"

namespace luseel {

constexpr int kAzimuthBins = 360;

struct GccConfig {
  int frame_size = 512;
  int hop_size = 256;
  int max_lag = 16;
  double epsilon = 1e-8;
  // Frames whose mean-square energy (either channel) is below this are zeroed.
  double energy_floor = 1e-10;

  int64_t lags() const { return 2 * max_lag + 1; }
};

// Per-frame PHAT-weighted cross-correlation. Column j holds lag j - max_lag;
// a positive lag means the left channel leads.
struct GccFeatures {
  torch::Tensor values;  // [time_frames x 2*max_lag+1]
  int max_lag = 0;

  int argmax_lag(int64_t frame) const;
};

// Tensor form on [B x 2 x frames]; returns [B x time_frames x 2*max_lag+1].
torch::Tensor gcc_phat_tensor(const torch::Tensor& x, const GccConfig& cfg);
GccFeatures gcc_phat(const Waveform& x, const GccConfig& cfg = {});

// Likelihood over N azimuth bins; bin i is centred at i degrees.
struct DoADistribution {
  std::vector<double> probs;
};

// Wrapped normal pdf with variance sigma_sq (squared degrees) centred at
// d_deg, evaluated on circular bin distances.
DoADistribution gaussian_label(double d_deg, double sigma_sq = 5.0, int n_bins = kAzimuthBins);
torch::Tensor gaussian_label_tensor(double d_deg, double sigma_sq = 5.0, int n_bins = kAzimuthBins);

// Argmax bin centre in degrees; ties resolve to the lowest bin.
double decode_azimuth(const DoADistribution& d);
double decode_azimuth(const torch::Tensor& probs);

struct LocalizationConfig {
  int64_t tap_count = 5;
  int64_t tap_in = 64;   // spectral-stream width
  int64_t tap_out = 8;   // per-tap projection width
  std::vector<int64_t> fdoa_hidden{64, 32};
  int64_t pooled_len = 8;
  std::vector<int64_t> decoder_hidden{128, 128, 128, 128, 128};
  double dropout = 0.1;
  int64_t n_bins = kAzimuthBins;
  bool use_gcc = true;
  GccConfig gcc;

  int64_t decoder_input(int64_t extra = 0) const;
};

// Independent kernel-size-1 convolutions per tap, concatenated on channels.
class TapProjectionImpl : public torch::nn::Module {
 public:
  TapProjectionImpl(int64_t tap_count, int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const std::vector<torch::Tensor>& taps);
  int64_t out_channels() const { return out_channels_ * static_cast<int64_t>(projections_->size()); }

 private:
  int64_t out_channels_;
  torch::nn::ModuleList projections_;
};
TORCH_MODULE(TapProjection);

// 1x1 conv stack down to a single channel, then adaptive average pooling of
// the time axis to `pooled_len`; output [B x pooled_len].
class FdoaEncoderImpl : public torch::nn::Module {
 public:
  FdoaEncoderImpl(int64_t in_channels, const std::vector<int64_t>& hidden, int64_t pooled_len, double dropout);
  torch::Tensor forward(const torch::Tensor& features);

 private:
  int64_t in_channels_;
  int64_t pooled_len_;
  torch::nn::ModuleList convs_;
  torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(FdoaEncoder);

// Fully connected stack with batch norm, ReLU and dropout between layers and
// a sigmoid over the azimuth bins.
class DoaDecoderImpl : public torch::nn::Module {
 public:
  DoaDecoderImpl(int64_t in_features, const std::vector<int64_t>& hidden, int64_t n_bins, double dropout);
  torch::Tensor forward(const torch::Tensor& x);
  int64_t in_features() const { return in_features_; }

 private:
  int64_t in_features_;
  torch::nn::ModuleList linears_, norms_;
  torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(DoaDecoder);

// Mean over frames then flattened: [B x frames x lags] -> [B x lags].
torch::Tensor pool_gcc(const torch::Tensor& gcc);

// Tap projection, F-DoA encoder and DoA decoder with optional GCC input.
class LocalizationHeadImpl : public torch::nn::Module {
 public:
  explicit LocalizationHeadImpl(const LocalizationConfig& cfg);

  // taps: each [B x tap_in x T]; gcc: [B x frames x lags] (ignored unless use_gcc).
  torch::Tensor forward(const std::vector<torch::Tensor>& taps, const torch::Tensor& gcc = {});

  const LocalizationConfig& config() const { return cfg_; }

 private:
  LocalizationConfig cfg_;
  TapProjection taps_{nullptr};
  FdoaEncoder fdoa_{nullptr};
  DoaDecoder decoder_{nullptr};
};
TORCH_MODULE(LocalizationHead);

}  // namespace luseel
