#include <torch/torch.h>

#include <iostream>

#include "CLI11.hpp"
#include "luseel/commands.hpp"
#include "luseel/errors.hpp"

using namespace luseel;

int main(int argc, char** argv) {
  CLI::App app{"Language-queried binaural sound extraction and localization"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Freeze a scene set for evaluation");
  simulate->add_option("--config", sim.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out, "Output scene file (JSON lines)")->required();
  simulate->add_option("--split", sim.split, "Corpus to draw clips from")->check(CLI::IsMember({"val", "train"}));
  simulate->add_option("--count", sim.count, "Number of scenes (default: train.val_scenes)");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", tr.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out-dir", tr.out_dir, "Run directory (default: train.out_dir)");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a frozen scene set");
  evaluate->add_option("--ckpt", ev.checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--scenes", ev.scenes, "Scene file from 'simulate'")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", ev.out, "Metric rows CSV")->required();
  evaluate->add_option("--manifest", ev.manifest, "Clip manifest (default: the checkpoint's val manifest)");
  evaluate->add_option("--doa-out", ev.doa_out, "Per-scene DoA records (default: <out>.doa.jsonl)");

  InferArgs inf;
  auto* infer = app.add_subcommand("infer", "Run one recording and prompt through a checkpoint");
  infer->add_option("--ckpt", inf.checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  infer->add_option("--wav", inf.wav, "Input recording")->required()->check(CLI::ExistingFile);
  infer->add_option("--prompt", inf.prompt, "Text query")->required();
  infer->add_option("--out", inf.out, "Extracted signal (wave file)");
  infer->add_option("--doa", inf.doa, "DoA estimate (JSON)");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Aggregate metric rows into summary tables");
  report->add_option("--rows", rep.rows, "Metric rows CSV (repeatable)")->required()->check(CLI::ExistingFile);
  report->add_option("--out-dir", rep.out_dir, "Output directory")->required();

  ToyCorpusArgs toy;
  auto* make_toy = app.add_subcommand("make-toy-corpus", "Write a synthetic corpus and a matching toy config");
  make_toy->add_option("--out-dir", toy.out_dir, "Output directory")->required();
  make_toy->add_option("--train-clips", toy.train_clips)->check(CLI::PositiveNumber);
  make_toy->add_option("--val-clips", toy.val_clips)->check(CLI::PositiveNumber);
  make_toy->add_option("--seed", toy.seed);
  make_toy->add_option("--duration", toy.duration_s, "Clip length in seconds")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      std::cout << "wrote " << cmd_simulate(sim) << " scenes to " << sim.out.string() << "\n";
    } else if (*train) {
      const auto r = cmd_train(tr, std::cout);
      std::cout << "finished after " << r.state.step << " steps, best val loss " << r.state.best_val_loss
                << (r.early_stopped ? " (early stop)" : "") << "\n";
    } else if (*evaluate) {
      const auto r = cmd_evaluate(ev);
      const auto s = summarize(r.rows);
      std::cout << "scenes " << r.rows.size();
      if (s.si_snri) std::cout << " si_snri " << *s.si_snri << " sdri " << s.sdri.value_or(0.0);
      if (s.mae) std::cout << " doa_acc " << s.doa_acc.value_or(0.0) << " mae " << *s.mae;
      std::cout << "\n";
    } else if (*infer) {
      cmd_infer(inf);
    } else if (*report) {
      const auto files = cmd_report(rep);
      std::cout << "wrote " << files.summary.string() << "\n";
    } else if (*make_toy) {
      std::cout << "wrote " << cmd_make_toy_corpus(toy).string() << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
