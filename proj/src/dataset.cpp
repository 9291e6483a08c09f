#include "luseel/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <optional>
#include <thread>

#include "luseel/errors.hpp"
#include "luseel/localization.hpp"

namespace luseel {

Renderer make_renderer(const ExperimentConfig& cfg) {
  Renderer r;
  if (!cfg.data.hrir_dir.empty()) {
    r = Renderer::from_hrirs(
        std::make_shared<const HrirSet>(HrirSet::from_directory(cfg.data.hrir_dir, cfg.sampling.sample_rate)));
  }
  r.head = cfg.head;
  r.ild_max_db = cfg.ild_max_db;
  return r;
}

uint64_t scene_seed(uint64_t seed, const std::string& stream, uint64_t index) {
  return derive_seed(seed ^ stable_hash(stream), index);
}

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads, rethrowing the
// first failure.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn fn) {
  const size_t k = std::min<size_t>(n, static_cast<size_t>(std::max(workers, 1)));
  if (k <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(k);
  std::vector<std::thread> threads;
  for (size_t w = 0; w < k; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (size_t i = w; i < n; i += k) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::vector<SimulatedScene> simulate_all(const std::vector<uint64_t>& seeds, const ExperimentConfig& cfg,
                                         const Corpus& corpus, const Renderer& renderer, int workers) {
  std::vector<std::optional<SimulatedScene>> slots(seeds.size());
  parallel_for(seeds.size(), workers, [&](size_t i) {
    slots[i] = simulate_scene(seeds[i], corpus, cfg.n_sources, cfg.sampling, renderer);
  });
  std::vector<SimulatedScene> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<SceneSpec> make_scene_set(const ExperimentConfig& cfg, const Corpus& corpus, const std::string& stream,
                                      int count, const Renderer& renderer) {
  if (count < 0) throw ConfigError("scene set: negative count");
  std::vector<uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(scene_seed(cfg.seed, stream, static_cast<uint64_t>(i)));
  auto sims = simulate_all(seeds, cfg, corpus, renderer, cfg.train.num_workers);
  std::vector<SceneSpec> specs;
  for (int i = 0; i < count; ++i) {
    auto spec = std::move(sims[static_cast<size_t>(i)].spec);
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%05d", stream.c_str(), i);
    spec.id = id;
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<BinauralScene> render_all(const std::vector<SceneSpec>& specs, const Corpus& corpus,
                                      const Renderer& renderer, int workers) {
  std::vector<std::optional<BinauralScene>> slots(specs.size());
  parallel_for(specs.size(), workers, [&](size_t i) { slots[i] = render_scene(specs[i], corpus, renderer); });
  std::vector<BinauralScene> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

Batch collate(const std::vector<const BinauralScene*>& scenes, const EmbeddingProvider& provider, double sigma_sq) {
  if (scenes.empty()) throw InputError("collate: empty batch");
  std::vector<torch::Tensor> mix, tgt, lab;
  Batch b;
  for (const auto* s : scenes) {
    if (s->mixture.frames() != scenes.front()->mixture.frames()) throw InputError("collate: scene lengths differ");
    mix.push_back(s->mixture.samples());
    tgt.push_back(s->target.samples());
    lab.push_back(gaussian_label_tensor(s->target_azimuth_deg, sigma_sq));
    b.tokens.push_back(provider.embed(s->prompt));
    b.azimuths.push_back(s->target_azimuth_deg);
  }
  b.mixture = torch::stack(mix);
  b.target = torch::stack(tgt);
  b.label = torch::stack(lab);
  return b;
}

}  // namespace luseel
