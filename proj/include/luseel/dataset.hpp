#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include "luseel/conditioning.hpp"
#include "luseel/config.hpp"
#include "luseel/scene.hpp"

namespace luseel {

// Parametric head model, or the HRIR set in cfg.data.hrir_dir when given.
Renderer make_renderer(const ExperimentConfig& cfg);

// Seed of scene `index` in the named stream ("train", "val", ...).
uint64_t scene_seed(uint64_t seed, const std::string& stream, uint64_t index);

// Frozen scene set: `count` scenes simulated from `corpus` with ids
// "<stream>_<index>" and seeds from scene_seed().
std::vector<SceneSpec> make_scene_set(const ExperimentConfig& cfg, const Corpus& corpus, const std::string& stream,
                                      int count, const Renderer& renderer);

// Renders specs on up to `workers` threads; output order follows input.
std::vector<BinauralScene> render_all(const std::vector<SceneSpec>& specs, const Corpus& corpus,
                                      const Renderer& renderer, int workers);

// Simulates fresh scenes for the given seeds on up to `workers` threads.
std::vector<SimulatedScene> simulate_all(const std::vector<uint64_t>& seeds, const ExperimentConfig& cfg,
                                         const Corpus& corpus, const Renderer& renderer, int workers);

struct Batch {
  torch::Tensor mixture;              // [B x 2 x frames], float64
  torch::Tensor target;               // [B x 2 x frames], float64
  torch::Tensor label;                // [B x 360] Gaussian DoA labels, float64
  std::vector<torch::Tensor> tokens;  // frozen prompt embeddings
  std::vector<double> azimuths;
};

Batch collate(const std::vector<const BinauralScene*>& scenes, const EmbeddingProvider& provider, double sigma_sq);

}  // namespace luseel
