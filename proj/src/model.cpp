#include "luseel/model.hpp"

#include "luseel/errors.hpp"

namespace luseel {

MlpGccHeadImpl::MlpGccHeadImpl(int64_t d_text, const LocalizationConfig& cfg) {
  decoder_ = register_module("doa_decoder",
                             DoaDecoder(d_text + cfg.gcc.lags(), cfg.decoder_hidden, cfg.n_bins, cfg.dropout));
}

torch::Tensor MlpGccHeadImpl::forward(const torch::Tensor& cond, const torch::Tensor& gcc) {
  return decoder_->forward(torch::cat({cond, pool_gcc(gcc).to(cond.options())}, 1));
}

LuseelModelImpl::LuseelModelImpl(const ExperimentConfig& cfg) : cfg_(cfg) {
  cfg_.finalize();
  const auto t = cfg_.traits();
  text_ = register_module("text", ProjectionStack(cfg_.text.projection));
  if (t.extraction) extractor_ = register_module("extractor", Extractor(cfg_.extractor));
  if (t.localization) {
    if (t.extraction) {
      localization_ = register_module("localization", LocalizationHead(cfg_.localization));
    } else {
      mlp_ = register_module("localization", MlpGccHead(cfg_.text.projection.d_text, cfg_.localization));
    }
  }
}

torch::Tensor LuseelModelImpl::model_input(const torch::Tensor& binaural) const {
  if (cfg_.traits().channels == 1) return binaural.mean(-2, /*keepdim=*/true);
  return binaural;
}

torch::Tensor LuseelModelImpl::reference(const torch::Tensor& binaural) const { return model_input(binaural); }

ModelOutput LuseelModelImpl::forward(const torch::Tensor& mixture, const std::vector<torch::Tensor>& tokens) {
  if (mixture.dim() != 3 || mixture.size(1) != 2) throw InputError("model: binaural [B x 2 x frames] mixture required");
  if (static_cast<int64_t>(tokens.size()) != mixture.size(0)) {
    throw InputError("model: one token embedding per mixture required");
  }
  const auto opts = text_->parameters().front().options();
  std::vector<torch::Tensor> pooled;
  pooled.reserve(tokens.size());
  for (const auto& tok : tokens) pooled.push_back(text_->forward(tok).pooled);
  const auto cond = torch::stack(pooled);

  const auto t = cfg_.traits();
  ModelOutput out;
  torch::Tensor gcc;
  if (t.localization && t.use_gcc) gcc = gcc_phat_tensor(mixture, cfg_.localization.gcc).to(opts);

  if (t.extraction) {
    auto ex = extractor_->forward(model_input(mixture).to(opts), cond);
    out.estimate = ex.estimate;
    if (t.localization) out.doa = localization_->forward(ex.taps, gcc);
  } else if (t.localization) {
    out.doa = mlp_->forward(cond, gcc);
  }
  return out;
}

std::unique_ptr<EmbeddingProvider> make_provider(const ExperimentConfig& cfg) {
  std::unique_ptr<EmbeddingProvider> p;
  if (cfg.text.provider == "toy_hash") {
    p = std::make_unique<ToyHashProvider>(cfg.text.projection.d_text, cfg.text.provider_seed);
  } else {
    if (cfg.text.sidecar.empty()) throw ConfigError("text: pretrained_adapter needs a sidecar path");
    p = std::make_unique<PretrainedAdapter>(PretrainedAdapter::from_sidecar(cfg.text.sidecar));
  }
  if (p->dim() != cfg.text.projection.d_text) {
    throw ConfigError("text: provider width " + std::to_string(p->dim()) + " != d_text " +
                      std::to_string(cfg.text.projection.d_text));
  }
  return p;
}

LuseelModel make_model(const ExperimentConfig& cfg) {
  torch::manual_seed(cfg.seed);
  return LuseelModel(cfg);
}

}  // namespace luseel
