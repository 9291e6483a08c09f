#include "luseel/extractor.hpp"

#include "luseel/errors.hpp"

namespace luseel {

namespace nn = torch::nn;

void ExtractorConfig::validate() const {
  if (channels_in != 1 && channels_in != 2) throw ConfigError("extractor: channels_in must be 1 or 2");
  if (depth < 2 || base_width < 1 || d_model < 1 || d_cond < 1) throw ConfigError("extractor: bad widths");
  if (n_self < 1 || n_cross < 0) throw ConfigError("extractor: bad attention counts");
  if (d_model % n_heads != 0) throw ConfigError("extractor: d_model must be divisible by n_heads");
  if (kernel != 2 * stride) throw ConfigError("extractor: kernel must be twice the stride");
  validate_reconstruction(fft_size, hop_size);
  const int64_t bins = fft_size / 2;
  int64_t reduce = 1;
  for (int64_t i = 0; i + 1 < depth; ++i) reduce *= stride;
  if (bins % reduce != 0 || bins / reduce < 1) {
    throw ConfigError("extractor: fft_size/2 must be divisible by stride^(depth-1)");
  }
}

std::vector<int64_t> ExtractorConfig::widths() const {
  std::vector<int64_t> w;
  for (int64_t i = 0; i + 1 < depth; ++i) w.push_back(base_width << i);
  w.push_back(d_model);
  return w;
}

std::string ExtractorConfig::layout() const {
  std::string out;
  int64_t s = n_self, c = n_cross;
  while (s > 0 || c > 0) {
    if (s > 0) {
      out += 'S';
      --s;
    }
    if (c > 0) {
      out += 'C';
      --c;
    }
  }
  return out;
}

int64_t ExtractorConfig::time_downsampling() const {
  int64_t r = 1;
  for (int64_t i = 0; i < depth; ++i) r *= stride;
  return r;
}

int64_t ExtractorConfig::freq_fold() const {
  int64_t r = fft_size / 2;
  for (int64_t i = 0; i + 1 < depth; ++i) r /= stride;
  return r;
}

int64_t ExtractorConfig::min_frames() const { return std::max<int64_t>(fft_size, time_downsampling()); }

int64_t ExtractorConfig::time_frames(int64_t frames) const {
  const int64_t r = time_downsampling();
  return (frames + r - 1) / r;
}

int64_t ExtractorConfig::spectral_frames(int64_t frames) const { return stft_frame_count(frames, hop_size); }

FilmImpl::FilmImpl(int64_t cond_dim, int64_t channels) : channels_(channels) {
  gamma_ = register_module("gamma", nn::Linear(cond_dim, channels));
  beta_ = register_module("beta", nn::Linear(cond_dim, channels));
  torch::NoGradGuard guard;
  gamma_->weight.zero_();
  gamma_->bias.fill_(1.0);
  beta_->weight.zero_();
  beta_->bias.zero_();
}

torch::Tensor FilmImpl::forward(const torch::Tensor& h, const torch::Tensor& cond) {
  if (cond.dim() != 2 || cond.size(0) != h.size(0) || cond.size(1) != gamma_->weight.size(1)) {
    throw ConfigError("film: conditioning shape mismatch");
  }
  if (h.size(1) != channels_) throw ConfigError("film: feature channel mismatch");
  std::vector<int64_t> shape(static_cast<size_t>(h.dim()), 1);
  shape[0] = h.size(0);
  shape[1] = channels_;
  return gamma_->forward(cond).view(shape) * h + beta_->forward(cond).view(shape);
}

ExtractorImpl::ExtractorImpl(const ExtractorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  layout_ = cfg_.layout();
  const auto widths = cfg_.widths();
  const int64_t k = cfg_.kernel, s = cfg_.stride, pad = (k - s) / 2;
  const int64_t fold = cfg_.freq_fold();
  const int64_t spec_channels = 2 * cfg_.channels_in;

  time_encoder_ = register_module("time_encoder", nn::ModuleList());
  freq_encoder_ = register_module("freq_encoder", nn::ModuleList());
  time_decoder_ = register_module("time_decoder", nn::ModuleList());
  freq_decoder_ = register_module("freq_decoder", nn::ModuleList());

  for (int64_t i = 0; i < cfg_.depth; ++i) {
    const int64_t in_t = i == 0 ? cfg_.channels_in : widths[i - 1];
    const int64_t in_f = i == 0 ? spec_channels : widths[i - 1];
    time_encoder_->push_back(nn::Conv1d(nn::Conv1dOptions(in_t, widths[i], k).stride(s).padding(pad)));
    const bool last = i + 1 == cfg_.depth;
    auto fk = last ? std::vector<int64_t>{fold, 1} : std::vector<int64_t>{k, 1};
    auto fs = last ? std::vector<int64_t>{fold, 1} : std::vector<int64_t>{s, 1};
    auto fp = last ? std::vector<int64_t>{0, 0} : std::vector<int64_t>{pad, 0};
    freq_encoder_->push_back(nn::Conv2d(nn::Conv2dOptions(in_f, widths[i], fk).stride(fs).padding(fp)));
  }
  // Decoder layer j mirrors encoder layer depth-1-j.
  for (int64_t j = 0; j < cfg_.depth; ++j) {
    const int64_t e = cfg_.depth - 1 - j;
    const int64_t out_t = e == 0 ? cfg_.channels_in : widths[e - 1];
    const int64_t out_f = e == 0 ? spec_channels : widths[e - 1];
    time_decoder_->push_back(
        nn::ConvTranspose1d(nn::ConvTranspose1dOptions(widths[e], out_t, k).stride(s).padding(pad)));
    const bool first = j == 0;
    auto fk = first ? std::vector<int64_t>{fold, 1} : std::vector<int64_t>{k, 1};
    auto fs = first ? std::vector<int64_t>{fold, 1} : std::vector<int64_t>{s, 1};
    auto fp = first ? std::vector<int64_t>{0, 0} : std::vector<int64_t>{pad, 0};
    freq_decoder_->push_back(
        nn::ConvTranspose2d(nn::ConvTranspose2dOptions(widths[e], out_f, fk).stride(fs).padding(fp)));
  }

  time_attention_ = register_module("time_attention", nn::ModuleList());
  freq_attention_ = register_module("freq_attention", nn::ModuleList());
  time_film_ = register_module("time_film", nn::ModuleList());
  freq_film_ = register_module("freq_film", nn::ModuleList());
  for (char kind : layout_) {
    const bool cross = kind == 'C';
    time_attention_->push_back(AttentionBlock(cfg_.d_model, cfg_.n_heads, cfg_.ff_dim, cfg_.dropout, cross));
    freq_attention_->push_back(AttentionBlock(cfg_.d_model, cfg_.n_heads, cfg_.ff_dim, cfg_.dropout, cross));
    if (!cross) {
      time_film_->push_back(Film(cfg_.d_cond, cfg_.d_model));
      freq_film_->push_back(Film(cfg_.d_cond, cfg_.d_model));
    }
  }
}

std::vector<torch::Tensor> ExtractorImpl::encode_time(const torch::Tensor& x) {
  if (x.dim() != 3 || x.size(1) != cfg_.channels_in) {
    throw InputError("extractor: expected [B x " + std::to_string(cfg_.channels_in) + " x frames] input");
  }
  if (x.size(2) < cfg_.min_frames()) throw InputError("extractor: input shorter than the receptive field");
  const int64_t padded = cfg_.time_frames(x.size(2)) * cfg_.time_downsampling();
  auto h = torch::constant_pad_nd(x, {0, padded - x.size(2)});
  std::vector<torch::Tensor> skips;
  for (size_t i = 0; i < time_encoder_->size(); ++i) {
    h = torch::gelu(time_encoder_[i]->as<nn::Conv1d>()->forward(h));
    check_finite(h, "time_encoder." + std::to_string(i));
    skips.push_back(h);
  }
  return skips;
}

torch::Tensor ExtractorImpl::to_spec_channels(const torch::Tensor& x) const {
  // [B, C, F+1, T] complex -> [B, 2C, F, T] real, Nyquist bin dropped.
  auto spec = stft_tensor(x, cfg_.fft_size, cfg_.hop_size);
  spec = spec.slice(2, 0, cfg_.fft_size / 2);
  auto ri = torch::view_as_real(spec);  // [B, C, F, T, 2]
  ri = ri.permute({0, 1, 4, 2, 3});     // [B, C, 2, F, T]
  return ri.reshape({x.size(0), 2 * cfg_.channels_in, cfg_.fft_size / 2, spec.size(3)});
}

std::vector<torch::Tensor> ExtractorImpl::encode_freq(const torch::Tensor& spec_channels) {
  if (spec_channels.dim() != 4 || spec_channels.size(1) != 2 * cfg_.channels_in) {
    throw InputError("extractor: spectral input has the wrong channel count");
  }
  auto h = spec_channels;
  std::vector<torch::Tensor> skips;
  for (size_t i = 0; i < freq_encoder_->size(); ++i) {
    h = torch::gelu(freq_encoder_[i]->as<nn::Conv2d>()->forward(h));
    check_finite(h, "freq_encoder." + std::to_string(i));
    skips.push_back(h);
  }
  return skips;
}

ExtractorOutput ExtractorImpl::forward(const torch::Tensor& mixture, const torch::Tensor& cond) {
  if (mixture.dim() != 3 || mixture.size(1) != cfg_.channels_in) {
    throw InputError("extractor: expected [B x " + std::to_string(cfg_.channels_in) + " x frames] input");
  }
  const int64_t batch = mixture.size(0);
  const int64_t frames = mixture.size(2);
  if (frames < cfg_.min_frames()) throw InputError("extractor: input shorter than the receptive field");
  check_finite(cond, "conditioning");

  // Per-item scale normalization, undone on the output.
  auto scale = (mixture.pow(2).mean({1, 2}, /*keepdim=*/true) + 1e-10).sqrt();
  auto x = mixture / scale;

  auto time_skips = encode_time(x);
  auto spec_in = to_spec_channels(x);
  auto spec_scale = (spec_in.pow(2).mean({1, 2, 3}, /*keepdim=*/true) + 1e-10).sqrt();
  auto freq_skips = encode_freq(spec_in / spec_scale);

  // Attention streams in [B, L, D] layout.
  const auto& opts = time_skips.back().options();
  auto t = time_skips.back().transpose(1, 2);
  auto f = freq_skips.back().squeeze(2).transpose(1, 2);
  t = t + sinusoidal_positions(t.size(1), cfg_.d_model, opts).unsqueeze(0);
  f = f + sinusoidal_positions(f.size(1), cfg_.d_model, opts).unsqueeze(0);

  std::vector<torch::Tensor> taps;
  size_t film_index = 0;
  for (size_t i = 0; i < layout_.size(); ++i) {
    auto time_block = time_attention_[i]->as<AttentionBlock>();
    auto freq_block = freq_attention_[i]->as<AttentionBlock>();
    if (layout_[i] == 'S') {
      auto tf = time_film_[film_index]->as<Film>();
      auto ff = freq_film_[film_index]->as<Film>();
      ++film_index;
      t = tf->forward(t.transpose(1, 2), cond).transpose(1, 2);
      f = ff->forward(f.transpose(1, 2), cond).transpose(1, 2);
      t = time_block->forward(t);
      f = freq_block->forward(f);
    } else {
      auto t_next = time_block->forward(t, f);
      auto f_next = freq_block->forward(f, t);
      t = t_next;
      f = f_next;
    }
    check_finite(t, "time_attention." + std::to_string(i));
    check_finite(f, "freq_attention." + std::to_string(i));
    taps.push_back(f.transpose(1, 2));
  }

  // Time decoder.
  auto ht = t.transpose(1, 2);
  for (size_t j = 0; j < time_decoder_->size(); ++j) {
    ht = ht + time_skips[time_skips.size() - 1 - j];
    ht = time_decoder_[j]->as<nn::ConvTranspose1d>()->forward(ht);
    if (j + 1 < time_decoder_->size()) ht = torch::gelu(ht);
    check_finite(ht, "time_decoder." + std::to_string(j));
  }
  auto time_out = ht.slice(2, 0, frames);

  // Spectral decoder.
  auto hf = f.transpose(1, 2).unsqueeze(2);
  for (size_t j = 0; j < freq_decoder_->size(); ++j) {
    hf = hf + freq_skips[freq_skips.size() - 1 - j];
    hf = freq_decoder_[j]->as<nn::ConvTranspose2d>()->forward(hf);
    if (j + 1 < freq_decoder_->size()) hf = torch::gelu(hf);
    check_finite(hf, "freq_decoder." + std::to_string(j));
  }
  hf = hf * spec_scale;
  const int64_t bins = cfg_.fft_size / 2;
  auto ri = hf.reshape({batch, cfg_.channels_in, 2, bins, hf.size(3)}).permute({0, 1, 3, 4, 2}).contiguous();
  auto spec = torch::view_as_complex(ri);
  spec = torch::constant_pad_nd(spec, {0, 0, 0, 1});  // zero Nyquist bin
  auto freq_out = istft_tensor(spec, cfg_.fft_size, cfg_.hop_size, frames);

  auto estimate = (time_out + freq_out) * scale;
  check_finite(estimate, "output");
  return ExtractorOutput{estimate, std::move(taps)};
}

Extraction extract(Extractor& net, const Waveform& mixture, const ConditioningEmbedding& cond) {
  torch::NoGradGuard guard;
  const auto ref = net->parameters().front();
  auto x = mixture.samples().to(ref.options()).unsqueeze(0);
  auto out = net->forward(x, cond.pooled.detach().to(ref.options()).unsqueeze(0));
  std::vector<torch::Tensor> taps;
  for (auto& t : out.taps) taps.push_back(t.squeeze(0));
  return Extraction{Waveform(out.estimate.squeeze(0).to(torch::kFloat64), mixture.sample_rate()), std::move(taps)};
}

}  // namespace luseel
