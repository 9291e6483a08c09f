#pragma once

#include <torch/torch.h>

#include <string>

namespace luseel {

// Sinusoidal position table, [length x dim].
torch::Tensor sinusoidal_positions(int64_t length, int64_t dim, const torch::TensorOptions& options);

// Throws NumericError naming `where` if `t` holds NaN or infinity.
void check_finite(const torch::Tensor& t, const std::string& where);

// Pre-norm transformer block. Self-attention when called without a context;
// cross-attention (queries from `x`, keys/values from `context`) otherwise.
class AttentionBlockImpl : public torch::nn::Module {
 public:
  AttentionBlockImpl(int64_t dim, int64_t heads, int64_t ff_dim, double dropout, bool cross);

  // x: [B x L x D], context: [B x S x D].
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& context = {});

  bool is_cross() const { return cross_; }

 private:
  torch::Tensor attend(const torch::Tensor& q_in, const torch::Tensor& kv_in);

  int64_t dim_;
  int64_t heads_;
  bool cross_;
  torch::nn::LayerNorm norm_q_{nullptr}, norm_kv_{nullptr}, norm_ff_{nullptr};
  torch::nn::Linear query_{nullptr}, key_{nullptr}, value_{nullptr}, out_{nullptr};
  torch::nn::Linear ff_in_{nullptr}, ff_out_{nullptr};
  torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(AttentionBlock);

}  // namespace luseel
