#include "luseel/nn.hpp"

#include <cmath>

#include "luseel/errors.hpp"

namespace luseel {

torch::Tensor sinusoidal_positions(int64_t length, int64_t dim, const torch::TensorOptions& options) {
  auto pos = torch::arange(length, options.dtype(torch::kFloat64)).unsqueeze(1);
  auto i = torch::arange(dim, options.dtype(torch::kFloat64));
  auto freq = torch::exp(-std::log(10000.0) * (2.0 * torch::floor(i / 2.0)) / static_cast<double>(dim));
  auto angle = pos * freq.unsqueeze(0);
  auto even = (torch::remainder(i, 2) == 0).unsqueeze(0);
  return torch::where(even, torch::sin(angle), torch::cos(angle)).to(options.dtype());
}

void check_finite(const torch::Tensor& t, const std::string& where) {
  if (!torch::isfinite(t).all().item<bool>()) throw NumericError(where, "non-finite activations");
}

AttentionBlockImpl::AttentionBlockImpl(int64_t dim, int64_t heads, int64_t ff_dim, double dropout, bool cross)
    : dim_(dim), heads_(heads), cross_(cross) {
  if (heads < 1 || dim % heads != 0) throw ConfigError("attention: dim must be divisible by heads");
  norm_q_ = register_module("norm_q", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  if (cross) norm_kv_ = register_module("norm_kv", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm_ff_ = register_module("norm_ff", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  query_ = register_module("query", torch::nn::Linear(dim, dim));
  key_ = register_module("key", torch::nn::Linear(dim, dim));
  value_ = register_module("value", torch::nn::Linear(dim, dim));
  out_ = register_module("out", torch::nn::Linear(dim, dim));
  ff_in_ = register_module("ff_in", torch::nn::Linear(dim, ff_dim));
  ff_out_ = register_module("ff_out", torch::nn::Linear(ff_dim, dim));
  drop_ = register_module("drop", torch::nn::Dropout(dropout));
}

torch::Tensor AttentionBlockImpl::attend(const torch::Tensor& q_in, const torch::Tensor& kv_in) {
  const int64_t b = q_in.size(0);
  const int64_t lq = q_in.size(1);
  const int64_t lk = kv_in.size(1);
  const int64_t hd = dim_ / heads_;
  auto split = [&](const torch::Tensor& t, int64_t len) {
    return t.view({b, len, heads_, hd}).transpose(1, 2);
  };
  auto q = split(query_->forward(q_in), lq);
  auto k = split(key_->forward(kv_in), lk);
  auto v = split(value_->forward(kv_in), lk);
  auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd));
  auto weights = drop_->forward(torch::softmax(scores, -1));
  auto ctx = torch::matmul(weights, v).transpose(1, 2).reshape({b, lq, dim_});
  return out_->forward(ctx);
}

torch::Tensor AttentionBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& context) {
  if (cross_ && !context.defined()) throw ConfigError("attention: cross block needs a context");
  auto q = norm_q_->forward(x);
  auto kv = cross_ ? norm_kv_->forward(context) : q;
  auto h = x + drop_->forward(attend(q, kv));
  auto ff = ff_out_->forward(torch::gelu(ff_in_->forward(norm_ff_->forward(h))));
  return h + drop_->forward(ff);
}

}  // namespace luseel
