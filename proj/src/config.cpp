#include "luseel/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "luseel/errors.hpp"

namespace luseel {

using nlohmann::json;

std::string VariantTraits::task() const {
  if (extraction && localization) return "Both";
  return extraction ? "Extraction" : "Localization";
}

VariantTraits traits(Variant v) {
  switch (v) {
    case Variant::THtdemucs: return {1, true, false, false};
    case Variant::MlpGcc: return {2, false, true, true};
    case Variant::LuseelDagger: return {2, true, false, false};
    case Variant::LuseelCircle: return {2, true, true, false};
    case Variant::Luseel: return {2, true, true, true};
  }
  throw ConfigError("unknown variant");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::THtdemucs: return "t_htdemucs";
    case Variant::MlpGcc: return "mlp_gcc";
    case Variant::LuseelDagger: return "luseel_dagger";
    case Variant::LuseelCircle: return "luseel_circle";
    case Variant::Luseel: return "luseel";
  }
  throw ConfigError("unknown variant");
}

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants()) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + name + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::THtdemucs, Variant::MlpGcc, Variant::LuseelDagger,
                                      Variant::LuseelCircle, Variant::Luseel};
  return v;
}

ExperimentConfig ExperimentConfig::toy(Variant v, int n_sources) {
  ExperimentConfig c;
  c.variant = v;
  c.n_sources = n_sources;
  c.toy_scale = true;
  c.sampling.duration_s = 1.0;
  c.text.projection = ProjectionConfig{};
  c.finalize();
  return c;
}

ExperimentConfig ExperimentConfig::full_scale(Variant v, int n_sources) {
  ExperimentConfig c;
  c.variant = v;
  c.n_sources = n_sources;
  c.toy_scale = false;
  c.sampling.duration_s = 10.0;

  c.text.provider = "pretrained_adapter";
  c.text.projection.d_text = 512;
  c.text.projection.n_layers = 5;
  c.text.projection.n_heads = 2;
  c.text.projection.ff_dim = 1024;

  c.extractor.base_width = 48;
  c.extractor.d_model = 384;
  c.extractor.n_heads = 8;
  c.extractor.ff_dim = 1536;

  c.localization.tap_out = 100;
  c.localization.fdoa_hidden = {512, 256};
  c.localization.pooled_len = 128;
  c.localization.decoder_hidden = {1024, 1024, 1024, 1024, 1024};

  c.train.batch_size = 128;
  c.train.lr = 1e-4;
  c.train.warmup_steps = 5000;
  c.train.steps_per_epoch = 1000;
  c.train.max_epochs = 1000;
  c.train.val_scenes = 500;
  c.train.num_workers = 4;
  c.finalize();
  return c;
}

void ExperimentConfig::finalize() {
  if (n_sources != 2 && n_sources != 3) throw ConfigError("config: n_sources must be 2 or 3");
  const auto t = traits();
  extractor.channels_in = t.channels;
  extractor.d_cond = text.projection.d_text;
  localization.use_gcc = t.use_gcc;
  localization.tap_count = extractor.n_self + extractor.n_cross;
  localization.tap_in = extractor.d_model;
  extractor.validate();
  loss.validate();

  if (text.provider != "toy_hash" && text.provider != "pretrained_adapter") {
    throw ConfigError("config: unknown text provider '" + text.provider + "'");
  }
  if (text.projection.d_text % text.projection.n_heads != 0) {
    throw ConfigError("config: d_text must be divisible by the number of text heads");
  }
  if (!(sampling.duration_s > 0.0) || sampling.sample_rate <= 0) throw ConfigError("config: bad scene duration");
  if (sampling.snr_low_db > sampling.snr_high_db) throw ConfigError("config: snr range reversed");
  if (!(sampling.min_separation_deg >= 0.0) || sampling.min_separation_deg * n_sources >= 360.0) {
    throw ConfigError("config: min_separation_deg unsatisfiable");
  }
  const auto frames = static_cast<int64_t>(std::llround(sampling.duration_s * sampling.sample_rate));
  if (frames < extractor.min_frames()) throw ConfigError("config: scenes shorter than the extractor input");
  for (const auto& r : loss.freq_resolutions) {
    if (frames <= r.fft_size / 2) throw ConfigError("config: scenes shorter than a loss STFT frame");
  }

  if (train.batch_size < 1 || train.accum_steps < 1) throw ConfigError("config: batch_size and accum_steps >= 1");
  if (t.localization && train.batch_size < 2) {
    throw ConfigError("config: batch_size >= 2 required for batch-normalized DoA decoder");
  }
  if (!(train.lr > 0.0) || train.warmup_steps < 0 || train.weight_decay < 0.0) {
    throw ConfigError("config: bad optimizer settings");
  }
  if (train.steps_per_epoch < 1 || train.max_epochs < 1 || train.max_steps < 0) {
    throw ConfigError("config: bad epoch settings");
  }
  if (train.plateau_patience_epochs < 1 || train.early_stop_epochs < 1) throw ConfigError("config: bad patience");
  if (train.fixed_train_scenes < 0 || train.val_scenes < 1 || train.num_workers < 1) {
    throw ConfigError("config: bad scene counts");
  }
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      j.at(key).get_to(out);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(std::string("config: section '") + key + "' must be an object");
  return j.at(key);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  bool toy_scale = true;
  read(j, "toy_scale", toy_scale);
  std::string variant_name = "luseel";
  read(j, "variant", variant_name);
  int n_sources = 2;
  read(j, "n_sources", n_sources);
  const Variant v = parse_variant(variant_name);
  ExperimentConfig c = toy_scale ? toy(v, 2) : full_scale(v, 2);
  c.n_sources = n_sources;
  read(j, "seed", c.seed);

  const auto& data = section(j, "data");
  read(data, "train_manifest", c.data.train_manifest);
  read(data, "val_manifest", c.data.val_manifest);
  read(data, "hrir_dir", c.data.hrir_dir);

  const auto& scene = section(j, "scene");
  read(scene, "duration_s", c.sampling.duration_s);
  read(scene, "sample_rate", c.sampling.sample_rate);
  read(scene, "min_separation_deg", c.sampling.min_separation_deg);
  read(scene, "snr_low_db", c.sampling.snr_low_db);
  read(scene, "snr_high_db", c.sampling.snr_high_db);
  read(scene, "head_radius_m", c.head.radius_m);
  read(scene, "speed_of_sound", c.head.speed_of_sound);
  read(scene, "ild_max_db", c.ild_max_db);

  const auto& text = section(j, "text");
  read(text, "provider", c.text.provider);
  read(text, "provider_seed", c.text.provider_seed);
  read(text, "sidecar", c.text.sidecar);
  read(text, "d_text", c.text.projection.d_text);
  read(text, "n_layers", c.text.projection.n_layers);
  read(text, "n_heads", c.text.projection.n_heads);
  read(text, "ff_dim", c.text.projection.ff_dim);
  read(text, "dropout", c.text.projection.dropout);
  read(text, "positional", c.text.projection.positional);

  const auto& ex = section(j, "extractor");
  read(ex, "base_width", c.extractor.base_width);
  read(ex, "depth", c.extractor.depth);
  read(ex, "n_self", c.extractor.n_self);
  read(ex, "n_cross", c.extractor.n_cross);
  read(ex, "d_model", c.extractor.d_model);
  read(ex, "n_heads", c.extractor.n_heads);
  read(ex, "ff_dim", c.extractor.ff_dim);
  read(ex, "fft_size", c.extractor.fft_size);
  read(ex, "hop_size", c.extractor.hop_size);
  read(ex, "kernel", c.extractor.kernel);
  read(ex, "stride", c.extractor.stride);
  read(ex, "dropout", c.extractor.dropout);

  const auto& loc = section(j, "localization");
  read(loc, "tap_out", c.localization.tap_out);
  read(loc, "fdoa_hidden", c.localization.fdoa_hidden);
  read(loc, "pooled_len", c.localization.pooled_len);
  read(loc, "decoder_hidden", c.localization.decoder_hidden);
  read(loc, "dropout", c.localization.dropout);
  const auto& gcc = section(loc, "gcc");
  read(gcc, "frame_size", c.localization.gcc.frame_size);
  read(gcc, "hop_size", c.localization.gcc.hop_size);
  read(gcc, "max_lag", c.localization.gcc.max_lag);
  read(gcc, "epsilon", c.localization.gcc.epsilon);
  read(gcc, "energy_floor", c.localization.gcc.energy_floor);

  const auto& loss = section(j, "loss");
  read(loss, "gamma", c.loss.gamma);
  read(loss, "sigma_sq", c.loss.sigma_sq);
  if (loss.contains("freq_resolutions")) {
    c.loss.freq_resolutions.clear();
    for (const auto& r : loss.at("freq_resolutions")) {
      if (!r.is_array() || r.size() != 2) throw ConfigError("config: freq_resolutions entries are [fft, hop]");
      c.loss.freq_resolutions.push_back({r[0].get<int>(), r[1].get<int>()});
    }
  }

  const auto& tr = section(j, "train");
  read(tr, "batch_size", c.train.batch_size);
  read(tr, "lr", c.train.lr);
  read(tr, "warmup_steps", c.train.warmup_steps);
  read(tr, "weight_decay", c.train.weight_decay);
  read(tr, "steps_per_epoch", c.train.steps_per_epoch);
  read(tr, "plateau_patience_epochs", c.train.plateau_patience_epochs);
  read(tr, "early_stop_epochs", c.train.early_stop_epochs);
  read(tr, "accum_steps", c.train.accum_steps);
  read(tr, "max_epochs", c.train.max_epochs);
  read(tr, "max_steps", c.train.max_steps);
  read(tr, "fixed_train_scenes", c.train.fixed_train_scenes);
  read(tr, "val_scenes", c.train.val_scenes);
  read(tr, "num_workers", c.train.num_workers);
  read(tr, "out_dir", c.train.out_dir);

  c.finalize();
  return c;
}

json ExperimentConfig::to_json() const {
  json res = json::array();
  for (const auto& r : loss.freq_resolutions) res.push_back({r.fft_size, r.hop_size});
  return json{
      {"variant", to_string(variant)},
      {"n_sources", n_sources},
      {"seed", seed},
      {"toy_scale", toy_scale},
      {"data", {{"train_manifest", data.train_manifest}, {"val_manifest", data.val_manifest}, {"hrir_dir", data.hrir_dir}}},
      {"scene",
       {{"duration_s", sampling.duration_s},
        {"sample_rate", sampling.sample_rate},
        {"min_separation_deg", sampling.min_separation_deg},
        {"snr_low_db", sampling.snr_low_db},
        {"snr_high_db", sampling.snr_high_db},
        {"head_radius_m", head.radius_m},
        {"speed_of_sound", head.speed_of_sound},
        {"ild_max_db", ild_max_db}}},
      {"text",
       {{"provider", text.provider},
        {"provider_seed", text.provider_seed},
        {"sidecar", text.sidecar},
        {"d_text", text.projection.d_text},
        {"n_layers", text.projection.n_layers},
        {"n_heads", text.projection.n_heads},
        {"ff_dim", text.projection.ff_dim},
        {"dropout", text.projection.dropout},
        {"positional", text.projection.positional}}},
      {"extractor",
       {{"channels_in", extractor.channels_in},
        {"base_width", extractor.base_width},
        {"depth", extractor.depth},
        {"n_self", extractor.n_self},
        {"n_cross", extractor.n_cross},
        {"d_model", extractor.d_model},
        {"n_heads", extractor.n_heads},
        {"ff_dim", extractor.ff_dim},
        {"fft_size", extractor.fft_size},
        {"hop_size", extractor.hop_size},
        {"kernel", extractor.kernel},
        {"stride", extractor.stride},
        {"dropout", extractor.dropout}}},
      {"localization",
       {{"use_gcc", localization.use_gcc},
        {"tap_count", localization.tap_count},
        {"tap_in", localization.tap_in},
        {"tap_out", localization.tap_out},
        {"fdoa_hidden", localization.fdoa_hidden},
        {"pooled_len", localization.pooled_len},
        {"decoder_hidden", localization.decoder_hidden},
        {"dropout", localization.dropout},
        {"n_bins", localization.n_bins},
        {"gcc",
         {{"frame_size", localization.gcc.frame_size},
          {"hop_size", localization.gcc.hop_size},
          {"max_lag", localization.gcc.max_lag},
          {"epsilon", localization.gcc.epsilon},
          {"energy_floor", localization.gcc.energy_floor}}}}},
      {"loss", {{"gamma", loss.gamma}, {"sigma_sq", loss.sigma_sq}, {"freq_resolutions", res}}},
      {"train",
       {{"batch_size", train.batch_size},
        {"lr", train.lr},
        {"warmup_steps", train.warmup_steps},
        {"weight_decay", train.weight_decay},
        {"steps_per_epoch", train.steps_per_epoch},
        {"plateau_patience_epochs", train.plateau_patience_epochs},
        {"early_stop_epochs", train.early_stop_epochs},
        {"accum_steps", train.accum_steps},
        {"max_epochs", train.max_epochs},
        {"max_steps", train.max_steps},
        {"fixed_train_scenes", train.fixed_train_scenes},
        {"val_scenes", train.val_scenes},
        {"num_workers", train.num_workers},
        {"out_dir", train.out_dir}}},
  };
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  auto cfg = from_json(j);
  // Relative manifest and sidecar paths resolve against the config file.
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(cfg.data.train_manifest);
  resolve(cfg.data.val_manifest);
  resolve(cfg.data.hrir_dir);
  resolve(cfg.text.sidecar);
  return cfg;
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot write " + path.string());
  out << to_json().dump(2) << "\n";
}

void apply_seed_override(ExperimentConfig& cfg) {
  const char* env = std::getenv("LUSEEL_SEED");
  if (env == nullptr || *env == '\0') return;
  try {
    size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    cfg.seed = v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("LUSEEL_SEED is not an unsigned integer: ") + env);
  }
}

}  // namespace luseel
