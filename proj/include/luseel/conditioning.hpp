#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "luseel/nn.hpp"
#include "luseel/prompt.hpp"

namespace luseel {

// Frozen source of token embeddings. Providers carry no trainable state.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  // [seq_len x dim] float64, never requiring grad.
  virtual torch::Tensor embed(const TextPrompt& prompt) const = 0;
  virtual int64_t dim() const = 0;
  virtual std::string name() const = 0;
  // Digest of everything the provider's output depends on.
  virtual uint64_t fingerprint() const = 0;
};

// Maps every whitespace token to a fixed N(0, 1) vector seeded by a stable
// hash of the token string.
class ToyHashProvider final : public EmbeddingProvider {
 public:
  explicit ToyHashProvider(int64_t dim = 64, uint64_t seed = 0);

  torch::Tensor embed(const TextPrompt& prompt) const override;
  int64_t dim() const override { return dim_; }
  std::string name() const override { return "toy_hash"; }
  uint64_t fingerprint() const override;

  torch::Tensor token_vector(const std::string& token) const;

 private:
  int64_t dim_;
  uint64_t seed_;
};

// Serves precomputed embeddings from a JSON-lines sidecar:
// {"text": str, "embedding": [[...], ...]}.
class PretrainedAdapter final : public EmbeddingProvider {
 public:
  static PretrainedAdapter from_sidecar(const std::filesystem::path& path);

  void add(const std::string& text, torch::Tensor embedding);

  torch::Tensor embed(const TextPrompt& prompt) const override;
  int64_t dim() const override { return dim_; }
  std::string name() const override { return "pretrained_adapter"; }
  uint64_t fingerprint() const override;

 private:
  int64_t dim_ = 0;
  std::map<std::string, torch::Tensor> table_;
};

inline torch::Tensor embed_text(const TextPrompt& prompt, const EmbeddingProvider& provider) {
  return provider.embed(prompt);
}

struct ProjectionConfig {
  int64_t d_text = 64;
  int64_t n_layers = 2;
  int64_t n_heads = 2;
  int64_t ff_dim = 128;
  double dropout = 0.0;
  bool positional = true;
};

struct ConditioningEmbedding {
  torch::Tensor tokens;  // [seq_len x d_text]
  torch::Tensor pooled;  // [d_text]
};

// Trainable self-attention stack aligning frozen text embeddings with the
// audio side. Pooled output is the sequence mean.
class ProjectionStackImpl : public torch::nn::Module {
 public:
  explicit ProjectionStackImpl(const ProjectionConfig& cfg);

  ConditioningEmbedding forward(const torch::Tensor& tokens);

  const ProjectionConfig& config() const { return cfg_; }

 private:
  ProjectionConfig cfg_;
  torch::nn::ModuleList layers_;
  torch::nn::LayerNorm final_norm_{nullptr};
};
TORCH_MODULE(ProjectionStack);

}  // namespace luseel
