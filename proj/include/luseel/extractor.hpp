#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "luseel/audio.hpp"
#include "luseel/conditioning.hpp"
#include "luseel/nn.hpp"

namespace luseel {

struct ExtractorConfig {
  int64_t channels_in = 2;
  int64_t base_width = 16;
  int64_t depth = 4;  // conv layers per encoder and per decoder
  int64_t n_self = 3;
  int64_t n_cross = 2;
  int64_t d_model = 64;
  int64_t n_heads = 1;
  int64_t ff_dim = 128;
  int64_t d_cond = 64;  // width of the pooled conditioning vector
  int fft_size = 1024;
  int hop_size = 256;
  int64_t kernel = 8;
  int64_t stride = 4;
  double dropout = 0.0;

  void validate() const;
  // Per-layer encoder output widths; the last equals d_model.
  std::vector<int64_t> widths() const;
  // Interleaved attention layout, 'S' for self and 'C' for cross.
  std::string layout() const;
  int64_t time_downsampling() const;
  // Frequency stride of the last spectral conv, folding the remaining bins.
  int64_t freq_fold() const;
  int64_t min_frames() const;
  int64_t time_frames(int64_t frames) const;
  int64_t spectral_frames(int64_t frames) const;
};

// Feature-wise linear modulation: out = gamma(cond) * h + beta(cond), per
// channel. Both maps start at the identity (gamma = 1, beta = 0).
class FilmImpl : public torch::nn::Module {
 public:
  FilmImpl(int64_t cond_dim, int64_t channels);

  // h: [B x channels x ...], cond: [B x cond_dim].
  torch::Tensor forward(const torch::Tensor& h, const torch::Tensor& cond);

  torch::nn::Linear& gamma_map() { return gamma_; }
  torch::nn::Linear& beta_map() { return beta_; }

 private:
  int64_t channels_;
  torch::nn::Linear gamma_{nullptr}, beta_{nullptr};
};
TORCH_MODULE(Film);

struct ExtractorOutput {
  torch::Tensor estimate;            // [B x C x frames]
  std::vector<torch::Tensor> taps;   // n_self + n_cross maps, each [B x d_model x spectral_frames]
};

// Dual-domain conditioned extraction network. A strided 1-D conv encoder on
// the waveform and a strided 2-D conv encoder on the complex spectrogram feed
// two attention streams (self-attention with FiLM in front, cross-attention
// between streams); mirrored transposed-conv decoders with skip connections
// produce a waveform and a spectrogram whose inverse transform is added to it.
class ExtractorImpl : public torch::nn::Module {
 public:
  explicit ExtractorImpl(const ExtractorConfig& cfg);

  // mixture: [B x channels_in x frames], cond: [B x d_cond].
  ExtractorOutput forward(const torch::Tensor& mixture, const torch::Tensor& cond);

  // Encoder stages exposed for inspection; inputs are already normalized.
  std::vector<torch::Tensor> encode_time(const torch::Tensor& x);
  std::vector<torch::Tensor> encode_freq(const torch::Tensor& spec_channels);

  const ExtractorConfig& config() const { return cfg_; }

 private:
  torch::Tensor to_spec_channels(const torch::Tensor& x) const;

  ExtractorConfig cfg_;
  std::string layout_;
  torch::nn::ModuleList time_encoder_, freq_encoder_;
  torch::nn::ModuleList time_decoder_, freq_decoder_;
  torch::nn::ModuleList time_attention_, freq_attention_;
  torch::nn::ModuleList time_film_, freq_film_;
};
TORCH_MODULE(Extractor);

// Inference on a single waveform (no gradient, eval mode left to the caller).
struct Extraction {
  Waveform estimate;
  std::vector<torch::Tensor> taps;
};
Extraction extract(Extractor& net, const Waveform& mixture, const ConditioningEmbedding& cond);

}  // namespace luseel
