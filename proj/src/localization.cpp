#include "luseel/localization.hpp"

#include <cmath>
#include <numbers>

#include "luseel/errors.hpp"

namespace luseel {

namespace nn = torch::nn;

int GccFeatures::argmax_lag(int64_t frame) const {
  return static_cast<int>(values[frame].argmax().item<int64_t>()) - max_lag;
}

torch::Tensor gcc_phat_tensor(const torch::Tensor& x, const GccConfig& cfg) {
  if (x.dim() != 3 || x.size(1) != 2) throw InputError("gcc_phat: binaural [B x 2 x frames] input required");
  if (cfg.frame_size < 2 || cfg.hop_size < 1) throw ConfigError("gcc_phat: bad frame or hop size");
  if (cfg.max_lag < 0 || cfg.max_lag > cfg.frame_size / 2) throw ConfigError("gcc_phat: max_lag exceeds frame_size/2");

  auto sig = x.detach();
  if (sig.size(2) < cfg.frame_size) sig = torch::constant_pad_nd(sig, {0, cfg.frame_size - sig.size(2)});
  auto frames = sig.unfold(2, cfg.frame_size, cfg.hop_size);  // [B, 2, F, frame]
  const auto window = torch::hann_window(cfg.frame_size, sig.options());
  const int64_t n_fft = 2 * cfg.frame_size;
  auto spec = torch::fft::rfft(frames * window, n_fft, -1);
  auto cross = spec.select(1, 0) * spec.select(1, 1).conj();
  auto r = torch::fft::irfft(cross / (cross.abs() + cfg.epsilon), n_fft, -1);  // [B, F, n_fft]

  // Lag l reads R[-l mod n_fft] so that left-leading delays land at positive lags.
  auto lags = torch::arange(-cfg.max_lag, cfg.max_lag + 1, torch::kLong);
  auto index = torch::remainder(-lags, n_fft);
  auto out = r.index_select(2, index);

  auto energy = frames.pow(2).mean(-1);  // [B, 2, F]
  auto active = (energy.select(1, 0) >= cfg.energy_floor).logical_and(energy.select(1, 1) >= cfg.energy_floor);
  return out * active.unsqueeze(-1).to(out.dtype());
}

GccFeatures gcc_phat(const Waveform& x, const GccConfig& cfg) {
  if (x.channels() != 2) throw InputError("gcc_phat: binaural input required");
  return GccFeatures{gcc_phat_tensor(x.samples().unsqueeze(0), cfg).squeeze(0), cfg.max_lag};
}

DoADistribution gaussian_label(double d_deg, double sigma_sq, int n_bins) {
  if (!(d_deg >= 0.0 && d_deg < 360.0)) throw InputError("gaussian_label: azimuth outside [0, 360)");
  if (!(sigma_sq > 0.0)) throw InputError("gaussian_label: sigma_sq must be positive");
  if (n_bins != kAzimuthBins) throw ConfigError("gaussian_label: 360 bins required");
  DoADistribution y;
  y.probs.resize(static_cast<size_t>(n_bins));
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * sigma_sq);
  for (int i = 0; i < n_bins; ++i) {
    const double diff = std::abs(static_cast<double>(i) - d_deg);
    const double delta = std::min(diff, 360.0 - diff);
    y.probs[static_cast<size_t>(i)] = norm * std::exp(-delta * delta / (2.0 * sigma_sq));
  }
  return y;
}

torch::Tensor gaussian_label_tensor(double d_deg, double sigma_sq, int n_bins) {
  return torch::tensor(gaussian_label(d_deg, sigma_sq, n_bins).probs, torch::kFloat64);
}

double decode_azimuth(const DoADistribution& d) {
  if (d.probs.empty()) throw InputError("decode_azimuth: empty distribution");
  size_t best = 0;
  for (size_t i = 1; i < d.probs.size(); ++i) {
    if (!std::isfinite(d.probs[i])) throw InputError("decode_azimuth: non-finite distribution");
    if (d.probs[i] > d.probs[best]) best = i;
  }
  return static_cast<double>(best) * 360.0 / static_cast<double>(d.probs.size());
}

double decode_azimuth(const torch::Tensor& probs) {
  auto p = probs.detach().to(torch::kFloat64).contiguous().view({-1});
  return decode_azimuth(DoADistribution{std::vector<double>(p.data_ptr<double>(), p.data_ptr<double>() + p.numel())});
}

int64_t LocalizationConfig::decoder_input(int64_t extra) const {
  return pooled_len + (use_gcc ? gcc.lags() : 0) + extra;
}

TapProjectionImpl::TapProjectionImpl(int64_t tap_count, int64_t in_channels, int64_t out_channels)
    : out_channels_(out_channels) {
  projections_ = register_module("projections", nn::ModuleList());
  for (int64_t i = 0; i < tap_count; ++i) {
    projections_->push_back(nn::Conv1d(nn::Conv1dOptions(in_channels, out_channels, 1)));
  }
}

torch::Tensor TapProjectionImpl::forward(const std::vector<torch::Tensor>& taps) {
  if (taps.size() != projections_->size()) throw ConfigError("tap_projection: wrong number of taps");
  std::vector<torch::Tensor> outs;
  for (size_t i = 0; i < taps.size(); ++i) {
    if (taps[i].size(2) != taps[0].size(2)) throw Error("tap_projection: taps disagree on the time axis");
    outs.push_back(projections_[i]->as<nn::Conv1d>()->forward(taps[i]));
  }
  return torch::cat(outs, 1);
}

FdoaEncoderImpl::FdoaEncoderImpl(int64_t in_channels, const std::vector<int64_t>& hidden, int64_t pooled_len,
                                 double dropout)
    : in_channels_(in_channels), pooled_len_(pooled_len) {
  if (pooled_len < 1) throw ConfigError("fdoa: pooled length must be positive");
  convs_ = register_module("convs", nn::ModuleList());
  int64_t prev = in_channels;
  for (int64_t h : hidden) {
    convs_->push_back(nn::Conv1d(nn::Conv1dOptions(prev, h, 1)));
    prev = h;
  }
  convs_->push_back(nn::Conv1d(nn::Conv1dOptions(prev, 1, 1)));
  drop_ = register_module("drop", nn::Dropout(dropout));
}

torch::Tensor FdoaEncoderImpl::forward(const torch::Tensor& features) {
  if (features.dim() != 3 || features.size(1) != in_channels_) {
    throw ConfigError("fdoa: expected " + std::to_string(in_channels_) + " input channels");
  }
  auto h = features;
  for (size_t i = 0; i < convs_->size(); ++i) {
    h = convs_[i]->as<nn::Conv1d>()->forward(h);
    if (i + 1 < convs_->size()) h = drop_->forward(torch::relu(h));
  }
  return torch::adaptive_avg_pool1d(h, {pooled_len_}).flatten(1);
}

DoaDecoderImpl::DoaDecoderImpl(int64_t in_features, const std::vector<int64_t>& hidden, int64_t n_bins,
                               double dropout)
    : in_features_(in_features) {
  linears_ = register_module("linears", nn::ModuleList());
  norms_ = register_module("norms", nn::ModuleList());
  int64_t prev = in_features;
  for (int64_t h : hidden) {
    linears_->push_back(nn::Linear(prev, h));
    norms_->push_back(nn::BatchNorm1d(h));
    prev = h;
  }
  linears_->push_back(nn::Linear(prev, n_bins));
  drop_ = register_module("drop", nn::Dropout(dropout));
}

torch::Tensor DoaDecoderImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 2 || x.size(1) != in_features_) {
    throw ConfigError("doa_decoder: input length " + std::to_string(x.size(-1)) + " != configured " +
                      std::to_string(in_features_));
  }
  auto h = x;
  for (size_t i = 0; i < linears_->size(); ++i) {
    h = linears_[i]->as<nn::Linear>()->forward(h);
    if (i + 1 < linears_->size()) {
      h = drop_->forward(torch::relu(norms_[i]->as<nn::BatchNorm1d>()->forward(h)));
    }
  }
  return torch::sigmoid(h);
}

torch::Tensor pool_gcc(const torch::Tensor& gcc) { return gcc.mean(1).flatten(1); }

LocalizationHeadImpl::LocalizationHeadImpl(const LocalizationConfig& cfg) : cfg_(cfg) {
  taps_ = register_module("tap_projection", TapProjection(cfg.tap_count, cfg.tap_in, cfg.tap_out));
  fdoa_ = register_module("fdoa_encoder",
                          FdoaEncoder(cfg.tap_count * cfg.tap_out, cfg.fdoa_hidden, cfg.pooled_len, cfg.dropout));
  decoder_ = register_module("doa_decoder",
                             DoaDecoder(cfg.decoder_input(), cfg.decoder_hidden, cfg.n_bins, cfg.dropout));
}

torch::Tensor LocalizationHeadImpl::forward(const std::vector<torch::Tensor>& taps, const torch::Tensor& gcc) {
  auto spatial = fdoa_->forward(taps_->forward(taps));
  if (cfg_.use_gcc) {
    if (!gcc.defined()) throw ConfigError("localization: GCC features required");
    spatial = torch::cat({spatial, pool_gcc(gcc).to(spatial.options())}, 1);
  }
  return decoder_->forward(spatial);
}

}  // namespace luseel
