#pragma once

#include <torch/torch.h>

#include <memory>
#include <vector>

#include "luseel/conditioning.hpp"
#include "luseel/config.hpp"
#include "luseel/extractor.hpp"
#include "luseel/localization.hpp"

namespace luseel {

// Text-plus-GCC localization baseline: pooled text conditioning concatenated
// with frame-pooled GCC-PHAT features, fed straight to the DoA decoder.
class MlpGccHeadImpl : public torch::nn::Module {
 public:
  MlpGccHeadImpl(int64_t d_text, const LocalizationConfig& cfg);

  // cond: [B x d_text], gcc: [B x frames x lags].
  torch::Tensor forward(const torch::Tensor& cond, const torch::Tensor& gcc);

 private:
  DoaDecoder decoder_{nullptr};
};
TORCH_MODULE(MlpGccHead);

struct ModelOutput {
  torch::Tensor estimate;  // [B x channels x frames], undefined without extraction
  torch::Tensor doa;       // [B x 360], undefined without localization
};

// One of the five systems, selected by ExperimentConfig::variant. Submodules
// are registered as "text", "extractor" and "localization" and only when the
// variant uses them.
class LuseelModelImpl : public torch::nn::Module {
 public:
  explicit LuseelModelImpl(const ExperimentConfig& cfg);

  // mixture: binaural [B x 2 x frames] (downmixed internally for mono
  // variants); tokens: one [seq_len x d_text] embedding per item.
  ModelOutput forward(const torch::Tensor& mixture, const std::vector<torch::Tensor>& tokens);

  // Extraction reference for this variant: the binaural target, or its
  // channel mean for mono systems. Works on [B x 2 x T] and [2 x T].
  torch::Tensor reference(const torch::Tensor& binaural) const;
  torch::Tensor model_input(const torch::Tensor& binaural) const;

  const ExperimentConfig& config() const { return cfg_; }
  VariantTraits traits() const { return cfg_.traits(); }

 private:
  ExperimentConfig cfg_;
  ProjectionStack text_{nullptr};
  Extractor extractor_{nullptr};
  LocalizationHead localization_{nullptr};
  MlpGccHead mlp_{nullptr};
};
TORCH_MODULE(LuseelModel);

// Frozen text provider named by cfg.text; its width must equal d_text.
std::unique_ptr<EmbeddingProvider> make_provider(const ExperimentConfig& cfg);

// Builds the model after seeding torch's generator with cfg.seed, so equal
// configs give equal initial weights.
LuseelModel make_model(const ExperimentConfig& cfg);

}  // namespace luseel
