#include "luseel/commands.hpp"

#include <fstream>
#include <ostream>

#include "json.hpp"
#include "luseel/errors.hpp"
#include "luseel/toy_corpus.hpp"
#include "luseel/wav_io.hpp"

namespace luseel {

namespace {

Corpus load_corpus(const std::string& manifest, const char* what) {
  if (manifest.empty()) throw ConfigError(std::string("config: data.") + what + " is not set");
  return Corpus::from_manifest(manifest);
}

ExperimentConfig load_config(const fs::path& path) {
  auto cfg = ExperimentConfig::load(path);
  apply_seed_override(cfg);
  return cfg;
}

void check_provider(const LoadedCheckpoint& ck, const EmbeddingProvider& provider) {
  if (ck.meta.provider_fingerprint != 0 && ck.meta.provider_fingerprint != provider.fingerprint()) {
    throw ProviderError("text provider differs from the one the checkpoint was trained with");
  }
}

}  // namespace

size_t cmd_simulate(const SimulateArgs& args) {
  const auto cfg = load_config(args.config);
  if (args.split != "val" && args.split != "train") throw ConfigError("simulate: split must be 'val' or 'train'");
  const auto corpus = args.split == "val" ? load_corpus(cfg.data.val_manifest, "val_manifest")
                                          : load_corpus(cfg.data.train_manifest, "train_manifest");
  const int count = args.count < 0 ? cfg.train.val_scenes : args.count;
  const auto specs = make_scene_set(cfg, corpus, args.split, count, make_renderer(cfg));
  write_scene_set(args.out, specs);
  return specs.size();
}

TrainResult cmd_train(const TrainArgs& args, std::ostream& log) {
  const auto cfg = load_config(args.config);
  const auto train_corpus = load_corpus(cfg.data.train_manifest, "train_manifest");
  const auto val_corpus = load_corpus(cfg.data.val_manifest, "val_manifest");
  const auto provider = make_provider(cfg);
  auto model = make_model(cfg);
  TrainOptions opts;
  opts.out_dir = args.out_dir.empty() ? fs::path(cfg.train.out_dir) : args.out_dir;
  opts.on_epoch = [&](const EpochRecord& e) {
    log << "epoch " << e.epoch << " step " << e.step << " lr " << e.lr << " train " << e.train_loss << " val "
        << e.val_loss << (e.improved ? " *" : "") << (e.halved ? " lr-halved" : "") << (e.stop ? " early-stop" : "")
        << "\n"
        << std::flush;
  };
  return train(model, *provider, train_corpus, val_corpus, opts);
}

EvalResult cmd_evaluate(const EvaluateArgs& args) {
  auto ck = load_checkpoint(args.checkpoint);
  const auto provider = make_provider(ck.config);
  check_provider(ck, *provider);
  const auto corpus = args.manifest.empty() ? load_corpus(ck.config.data.val_manifest, "val_manifest")
                                            : Corpus::from_manifest(args.manifest);
  const auto scenes = read_scene_set(args.scenes);
  auto res = evaluate(ck.model, *provider, scenes, corpus, make_renderer(ck.config));
  write_rows_csv(args.out, res.rows);
  if (ck.config.traits().localization) {
    write_doa_jsonl(args.doa_out.empty() ? fs::path(args.out.string() + ".doa.jsonl") : args.doa_out, res.doa);
  }
  return res;
}

void cmd_infer(const InferArgs& args) {
  auto ck = load_checkpoint(args.checkpoint);
  const auto provider = make_provider(ck.config);
  check_provider(ck, *provider);
  const auto t = ck.config.traits();
  auto input = read_wav_resampled(args.wav, ck.config.sampling.sample_rate);
  if (input.channels() == 1) {
    if (t.channels == 2) throw InputError("infer: this system needs a binaural (2-channel) recording");
    input = Waveform(input.samples().repeat({2, 1}), input.sample_rate());
  }
  const TextPrompt prompt(args.prompt);
  ck.model->eval();
  torch::NoGradGuard guard;
  const auto out = ck.model->forward(input.samples().unsqueeze(0), {provider->embed(prompt)});
  if (t.extraction) {
    if (args.out.empty()) throw ConfigError("infer: --out is required for extraction systems");
    write_wav(args.out, Waveform(out.estimate.squeeze(0).to(torch::kFloat64), input.sample_rate()));
  }
  if (t.localization) {
    if (args.doa.empty()) throw ConfigError("infer: --doa is required for localization systems");
    const auto probs = out.doa.squeeze(0).to(torch::kFloat64).contiguous();
    std::vector<double> p(probs.data_ptr<double>(), probs.data_ptr<double>() + probs.numel());
    if (args.doa.has_parent_path()) fs::create_directories(args.doa.parent_path());
    std::ofstream f(args.doa);
    if (!f) throw DataError("infer: cannot write " + args.doa.string());
    f << nlohmann::json{{"prompt", prompt.text()}, {"azimuth_deg", decode_azimuth(DoADistribution{p})}, {"probs", p}}
             .dump()
      << "\n";
  }
}

ReportFiles cmd_report(const ReportArgs& args) {
  std::vector<MetricRow> rows;
  for (const auto& path : args.rows) {
    auto part = read_rows_csv(path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return write_report(rows, args.out_dir);
}

fs::path cmd_make_toy_corpus(const ToyCorpusArgs& args) {
  const auto train_clips = make_toy_clips(args.train_clips, derive_seed(args.seed, 1), args.duration_s,
                                          kDefaultSampleRate, "train");
  const auto val_clips =
      make_toy_clips(args.val_clips, derive_seed(args.seed, 2), args.duration_s, kDefaultSampleRate, "val");
  write_toy_corpus(args.out_dir / "train", train_clips);
  write_toy_corpus(args.out_dir / "val", val_clips);

  auto cfg = ExperimentConfig::toy();
  cfg.seed = args.seed;
  cfg.sampling.duration_s = args.duration_s;
  cfg.data.train_manifest = "train/manifest.jsonl";
  cfg.data.val_manifest = "val/manifest.jsonl";
  cfg.train.out_dir = (args.out_dir / "run").string();
  cfg.finalize();
  const auto path = args.out_dir / "config.json";
  cfg.save(path);
  return path;
}

}  // namespace luseel
