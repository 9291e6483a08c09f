#include "luseel/trainer.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "luseel/errors.hpp"
#include "luseel/objectives.hpp"
#include "luseel/schedule.hpp"

namespace luseel {

namespace fs = std::filesystem;
using nlohmann::json;

LossTerms compute_loss(LuseelModelImpl& model, const ModelOutput& out, const Batch& batch) {
  const auto& cfg = model.config();
  const auto t = model.traits();
  const int64_t b = batch.mixture.size(0);
  const auto opts = out.estimate.defined() ? out.estimate.options() : out.doa.options();
  LossTerms terms{torch::zeros({b}, opts), torch::zeros({b}, opts), torch::zeros({b}, opts)};
  if (t.extraction) {
    const auto ref = model.reference(batch.target).to(opts);
    terms.signal = signal_loss_tensor(out.estimate, ref, cfg.loss.freq_resolutions);
  }
  if (t.localization) terms.mse = doa_loss_tensor(out.doa, batch.label.to(opts));
  if (t.extraction && t.localization) {
    terms.total = total_loss(terms.signal, terms.mse, cfg.loss.gamma);
  } else if (t.extraction) {
    terms.total = terms.signal;
  } else {
    terms.total = cfg.loss.gamma * terms.mse;
  }
  return terms;
}

namespace {

std::vector<const BinauralScene*> pointers(const std::vector<BinauralScene>& scenes, size_t begin, size_t end) {
  std::vector<const BinauralScene*> out;
  for (size_t i = begin; i < end; ++i) out.push_back(&scenes[i]);
  return out;
}

void set_lr(torch::optim::AdamW& opt, double lr) {
  for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamWOptions&>(g.options()).lr(lr);
}

using Snapshot = std::map<std::string, torch::Tensor>;

Snapshot snapshot(LuseelModel& model) {
  Snapshot s;
  for (const auto& p : model->named_parameters()) s[p.key()] = p.value().detach().clone();
  for (const auto& b : model->named_buffers()) s[b.key()] = b.value().detach().clone();
  return s;
}

void restore(LuseelModel& model, const Snapshot& s) {
  torch::NoGradGuard guard;
  for (auto& p : model->named_parameters()) p.value().copy_(s.at(p.key()));
  for (auto& b : model->named_buffers()) b.value().copy_(s.at(b.key()));
}

json to_json(const EpochRecord& e) {
  return json{{"epoch", e.epoch},
              {"step", e.step},
              {"lr", e.lr},
              {"train_loss", e.train_loss},
              {"val_loss", e.val_loss},
              {"best_val_loss", e.best_val_loss},
              {"epochs_since_improve", e.epochs_since_improve},
              {"halvings", e.halvings},
              {"improved", e.improved},
              {"halved", e.halved},
              {"stop", e.stop}};
}

}  // namespace

double validation_loss(LuseelModel& model, const EmbeddingProvider& provider, const std::vector<BinauralScene>& scenes,
                       int batch_size) {
  if (scenes.empty()) throw ConfigError("validation: no scenes");
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard guard;
  double sum = 0.0;
  const double sigma_sq = model->config().loss.sigma_sq;
  for (size_t i = 0; i < scenes.size(); i += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(scenes.size(), i + static_cast<size_t>(batch_size));
    const auto batch = collate(pointers(scenes, i, end), provider, sigma_sq);
    const auto out = model->forward(batch.mixture, batch.tokens);
    sum += compute_loss(*model, out, batch).total.sum().item<double>();
  }
  model->train(was_training);
  return sum / static_cast<double>(scenes.size());
}

TrainResult train(LuseelModel& model, const EmbeddingProvider& provider, const Corpus& train_corpus,
                  const Corpus& val_corpus, const TrainOptions& opts) {
  const ExperimentConfig& cfg = model->config();
  const auto& tc = cfg.train;
  const Renderer renderer = make_renderer(cfg);
  const uint64_t fingerprint = provider.fingerprint();

  auto train_specs = opts.train_scenes;
  if (train_specs.empty() && tc.fixed_train_scenes > 0) {
    train_specs = make_scene_set(cfg, train_corpus, "train_fixed", tc.fixed_train_scenes, renderer);
  }
  const auto fixed_train = render_all(train_specs, train_corpus, renderer, tc.num_workers);
  auto val_specs = opts.val_scenes;
  if (val_specs.empty()) val_specs = make_scene_set(cfg, val_corpus, "val", tc.val_scenes, renderer);
  const auto val = render_all(val_specs, val_corpus, renderer, tc.num_workers);

  torch::manual_seed(derive_seed(cfg.seed, 0x7472));
  torch::optim::AdamW optimizer(model->parameters(),
                                torch::optim::AdamWOptions(tc.lr).weight_decay(tc.weight_decay));
  PlateauSchedule plateau(tc.plateau_patience_epochs, tc.early_stop_epochs);

  std::ofstream log;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    cfg.save(opts.out_dir / "config.json");
    log.open(opts.out_dir / "train_log.jsonl");
  }

  TrainResult result;
  Snapshot best;
  auto& st = result.state;
  model->train();
  for (int64_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    st.epoch = epoch;
    double epoch_loss = 0.0;
    int64_t epoch_steps = 0;
    for (int64_t k = 0; k < tc.steps_per_epoch; ++k) {
      if (tc.max_steps > 0 && st.step >= tc.max_steps) break;
      ++st.step;
      st.lr_current = lr_at(st.step, plateau.halvings(), tc.lr, tc.warmup_steps);
      set_lr(optimizer, st.lr_current);
      optimizer.zero_grad();
      StepRecord rec{st.step, epoch, st.lr_current, 0.0, 0.0, 0.0};
      for (int micro = 0; micro < tc.accum_steps; ++micro) {
        const uint64_t base =
            (static_cast<uint64_t>(st.step - 1) * tc.accum_steps + micro) * static_cast<uint64_t>(tc.batch_size);
        std::vector<BinauralScene> fresh;
        std::vector<const BinauralScene*> items;
        if (!fixed_train.empty()) {
          for (int i = 0; i < tc.batch_size; ++i) items.push_back(&fixed_train[(base + i) % fixed_train.size()]);
        } else {
          std::vector<uint64_t> seeds;
          for (int i = 0; i < tc.batch_size; ++i) seeds.push_back(scene_seed(cfg.seed, "train", base + i));
          for (auto& s : simulate_all(seeds, cfg, train_corpus, renderer, tc.num_workers)) {
            fresh.push_back(std::move(s.scene));
          }
          for (const auto& s : fresh) items.push_back(&s);
        }
        const auto batch = collate(items, provider, cfg.loss.sigma_sq);
        const auto out = model->forward(batch.mixture, batch.tokens);
        const auto terms = compute_loss(*model, out, batch);
        const auto loss = terms.total.mean();
        const double value = loss.item<double>();
        if (!std::isfinite(value)) {
          throw NumericError("train", "non-finite loss at step " + std::to_string(st.step) +
                                          " (signal=" + std::to_string(terms.signal.mean().item<double>()) +
                                          ", mse=" + std::to_string(terms.mse.mean().item<double>()) + ")");
        }
        (loss / static_cast<double>(tc.accum_steps)).backward();
        rec.loss += value / tc.accum_steps;
        rec.signal += terms.signal.mean().item<double>() / tc.accum_steps;
        rec.mse += terms.mse.mean().item<double>() / tc.accum_steps;
      }
      optimizer.step();
      epoch_loss += rec.loss;
      ++epoch_steps;
      result.steps.push_back(rec);
      if (opts.on_step) opts.on_step(rec);
    }
    if (epoch_steps == 0) break;

    const double v = validation_loss(model, provider, val, tc.batch_size);
    const auto ev = plateau.observe(v);
    st.best_val_loss = plateau.best();
    st.epochs_since_improve = plateau.epochs_since_improve();
    if (ev.improved) {
      best = snapshot(model);
      if (!opts.out_dir.empty()) {
        st.best_checkpoint = opts.out_dir / "best";
        save_checkpoint(st.best_checkpoint, model, CheckpointMeta{st.step, epoch, v, fingerprint});
      }
    }
    EpochRecord er{epoch,
                   st.step,
                   st.lr_current,
                   epoch_loss / static_cast<double>(epoch_steps),
                   v,
                   plateau.best(),
                   plateau.epochs_since_improve(),
                   plateau.halvings(),
                   ev.improved,
                   ev.halved,
                   ev.stop};
    result.epochs.push_back(er);
    if (log.is_open()) log << to_json(er).dump() << "\n" << std::flush;
    if (opts.on_epoch) opts.on_epoch(er);
    if (ev.stop) {
      result.early_stopped = true;
      break;
    }
  }
  if (provider.fingerprint() != fingerprint) throw Error("train: text provider changed during training");
  if (opts.restore_best && !best.empty()) restore(model, best);
  model->eval();
  return result;
}

}  // namespace luseel
