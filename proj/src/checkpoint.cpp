#include "luseel/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "luseel/errors.hpp"

namespace luseel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

c10::Dict<std::string, at::Tensor> read_weights(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + file.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    c10::Dict<std::string, at::Tensor> out;
    for (const auto& e : torch::pickle_load(bytes).toGenericDict()) {
      out.insert(e.key().toStringRef(), e.value().toTensor());
    }
    return out;
  } catch (const c10::Error& e) {
    throw DataError("checkpoint: unreadable weights " + file.string() + ": " + e.what_without_backtrace());
  }
}

}  // namespace

void save_checkpoint(const fs::path& dir, LuseelModel& model, const CheckpointMeta& meta) {
  fs::create_directories(dir);
  model->config().save(dir / "config.json");
  {
    std::ofstream out(dir / "meta.json");
    out << json{{"step", meta.step},
                {"epoch", meta.epoch},
                {"best_val_loss", meta.best_val_loss},
                {"provider_fingerprint", meta.provider_fingerprint}}
               .dump(2)
        << "\n";
  }
  c10::Dict<std::string, at::Tensor> weights;
  for (const auto& p : model->named_parameters()) weights.insert(p.key(), p.value().detach().clone());
  for (const auto& b : model->named_buffers()) weights.insert(b.key(), b.value().detach().clone());
  const auto bytes = torch::pickle_save(weights);
  const auto tmp = dir / "weights.pt.tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("checkpoint: cannot write " + tmp.string());
  }
  fs::rename(tmp, dir / "weights.pt");
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("checkpoint: no such directory " + dir.string());
  LoadedCheckpoint ck;
  try {
    ck.config = ExperimentConfig::load(dir / "config.json");
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  {
    std::ifstream in(dir / "meta.json");
    if (!in) throw DataError("checkpoint: missing meta.json in " + dir.string());
    try {
      const auto j = json::parse(in);
      ck.meta.step = j.at("step").get<int64_t>();
      ck.meta.epoch = j.at("epoch").get<int64_t>();
      ck.meta.best_val_loss = j.at("best_val_loss").get<double>();
      ck.meta.provider_fingerprint = j.at("provider_fingerprint").get<uint64_t>();
    } catch (const json::exception& e) {
      throw DataError(std::string("checkpoint: bad meta.json: ") + e.what());
    }
  }
  ck.model = LuseelModel(ck.config);
  const auto weights = read_weights(dir / "weights.pt");
  torch::NoGradGuard guard;
  size_t used = 0;
  auto assign = [&](const std::string& name, torch::Tensor& dst) {
    if (!weights.contains(name)) throw DataError("checkpoint: missing tensor " + name);
    const auto src = weights.at(name);
    if (src.sizes() != dst.sizes()) throw DataError("checkpoint: shape mismatch for " + name);
    dst.copy_(src);
    ++used;
  };
  for (auto& p : ck.model->named_parameters()) assign(p.key(), p.value());
  for (auto& b : ck.model->named_buffers()) assign(b.key(), b.value());
  if (used != weights.size()) throw DataError("checkpoint: weights contain tensors the model does not have");
  return ck;
}

std::vector<std::string> checkpoint_tensor_names(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& item : read_weights(dir / "weights.pt")) names.push_back(item.key());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace luseel
