#include "luseel/conditioning.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "luseel/errors.hpp"
#include "luseel/rng.hpp"

namespace luseel {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

TextPrompt::TextPrompt(std::string text) : text_(trim(text)) {
  if (text_.empty()) throw InputError("prompt: empty text");
}

std::vector<std::string> TextPrompt::tokens() const {
  std::istringstream in(text_);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) {
    std::transform(tok.begin(), tok.end(), tok.begin(), [](unsigned char c) { return std::tolower(c); });
    out.push_back(tok);
  }
  return out;
}

ToyHashProvider::ToyHashProvider(int64_t dim, uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw ConfigError("toy_hash: dimension must be positive");
}

torch::Tensor ToyHashProvider::token_vector(const std::string& token) const {
  Rng rng(stable_hash(token) ^ mix64(seed_));
  auto v = torch::empty({dim_}, torch::kFloat64);
  auto acc = v.accessor<double, 1>();
  for (int64_t i = 0; i < dim_; ++i) acc[i] = rng.normal();
  return v;
}

torch::Tensor ToyHashProvider::embed(const TextPrompt& prompt) const {
  std::vector<torch::Tensor> rows;
  for (const auto& tok : prompt.tokens()) rows.push_back(token_vector(tok));
  return torch::stack(rows);
}

uint64_t ToyHashProvider::fingerprint() const {
  return mix64(static_cast<uint64_t>(dim_) ^ mix64(seed_));
}

PretrainedAdapter PretrainedAdapter::from_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ProviderError("pretrained_adapter: cannot open sidecar " + path.string());
  PretrainedAdapter adapter;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("pretrained_adapter: malformed sidecar line: ") + e.what());
    }
    const auto rows = j.at("embedding").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw ProviderError("pretrained_adapter: empty embedding for " + j.at("text").get<std::string>());
    auto t = torch::empty({static_cast<int64_t>(rows.size()), static_cast<int64_t>(rows[0].size())}, torch::kFloat64);
    for (size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows[0].size()) throw ProviderError("pretrained_adapter: ragged embedding");
      for (size_t c = 0; c < rows[r].size(); ++c) t[r][c] = rows[r][c];
    }
    adapter.add(j.at("text").get<std::string>(), t);
  }
  if (adapter.table_.empty()) throw ProviderError("pretrained_adapter: sidecar has no entries");
  return adapter;
}

void PretrainedAdapter::add(const std::string& text, torch::Tensor embedding) {
  if (embedding.dim() != 2 || embedding.size(0) < 1) throw ProviderError("pretrained_adapter: expected [seq x dim]");
  if (dim_ == 0) dim_ = embedding.size(1);
  if (embedding.size(1) != dim_) throw ProviderError("pretrained_adapter: inconsistent embedding width");
  table_.insert_or_assign(TextPrompt(text).text(), embedding.detach().to(torch::kFloat64).contiguous());
}

torch::Tensor PretrainedAdapter::embed(const TextPrompt& prompt) const {
  auto it = table_.find(prompt.text());
  if (it == table_.end()) throw ProviderError("pretrained_adapter: no embedding for \"" + prompt.text() + "\"");
  return it->second.clone();
}

uint64_t PretrainedAdapter::fingerprint() const {
  uint64_t h = mix64(static_cast<uint64_t>(dim_));
  for (const auto& [text, emb] : table_) {
    h = mix64(h ^ stable_hash(text));
    const double* p = emb.data_ptr<double>();
    std::string_view bytes(reinterpret_cast<const char*>(p), emb.numel() * sizeof(double));
    h = mix64(h ^ stable_hash(bytes));
  }
  return h;
}

ProjectionStackImpl::ProjectionStackImpl(const ProjectionConfig& cfg) : cfg_(cfg) {
  if (cfg.d_text < 1 || cfg.n_layers < 0) throw ConfigError("projection: bad dimensions");
  layers_ = register_module("layers", torch::nn::ModuleList());
  for (int64_t i = 0; i < cfg.n_layers; ++i) {
    layers_->push_back(AttentionBlock(cfg.d_text, cfg.n_heads, cfg.ff_dim, cfg.dropout, /*cross=*/false));
  }
  final_norm_ = register_module("final_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.d_text})));
}

ConditioningEmbedding ProjectionStackImpl::forward(const torch::Tensor& tokens) {
  if (tokens.dim() != 2 || tokens.size(0) < 1) throw ConfigError("projection: expected [seq_len x d_text]");
  if (tokens.size(1) != cfg_.d_text) {
    throw ConfigError("projection: token width " + std::to_string(tokens.size(1)) + " != configured d_text " +
                      std::to_string(cfg_.d_text));
  }
  const auto& ref = final_norm_->weight;
  auto h = tokens.detach().to(ref.options()).unsqueeze(0);
  if (cfg_.positional) h = h + sinusoidal_positions(h.size(1), cfg_.d_text, ref.options()).unsqueeze(0);
  for (auto& layer : *layers_) h = layer->as<AttentionBlock>()->forward(h);
  h = final_norm_->forward(h).squeeze(0);
  return ConditioningEmbedding{h, h.mean(0)};
}

}  // namespace luseel
