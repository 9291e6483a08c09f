#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "luseel/errors.hpp"
#include "luseel/localization.hpp"
#include "luseel/scene.hpp"
#include "luseel/wav_io.hpp"

using namespace luseel;
using namespace luseel::testing;

namespace {

// Most frequent GCC-PHAT argmax lag over active frames.
int modal_lag(const Waveform& stereo) {
  const auto gcc = gcc_phat(stereo);
  std::map<int, int> votes;
  for (int64_t f = 0; f < gcc.values.size(0); ++f) {
    if (gcc.values[f].abs().sum().item<double>() == 0.0) continue;
    ++votes[gcc.argmax_lag(f)];
  }
  int best = 0, count = -1;
  for (auto [lag, n] : votes) {
    if (n > count) {
      best = lag;
      count = n;
    }
  }
  return best;
}

}  // namespace

TEST_SUITE("scene_sim") {
  TEST_CASE("interferer SNRs are uniform in [-5, 5] dB") {
    const auto corpus = noise_corpus(6, 64);
    Rng rng(1);
    double sum = 0.0, lo = 1e9, hi = -1e9;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const auto spec = sample_scene(rng, corpus, 2);
      for (int s = 0; s < 2; ++s) {
        if (s == spec.target_index) continue;
        const double v = spec.sources[s].snr_db;
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    CHECK(lo >= -5.0);
    CHECK(hi <= 5.0);
    CHECK(std::abs(sum / n) < 0.2);
  }

  TEST_CASE("azimuths pass a chi-square uniformity test") {
    const auto corpus = noise_corpus(6, 64);
    Rng rng(2);
    std::vector<int> bins(36, 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const auto spec = sample_scene(rng, corpus, 2);
      ++bins[static_cast<size_t>(spec.sources[0].azimuth_deg / 10.0)];
    }
    const double expected = n / 36.0;
    double chi2 = 0.0;
    for (int b : bins) chi2 += (b - expected) * (b - expected) / expected;
    // 0.99 quantile of chi-square with 35 degrees of freedom.
    CHECK(chi2 < 57.342);
  }

  TEST_CASE("scene structure") {
    const auto corpus = noise_corpus(5, 64);
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      const auto spec = sample_scene(rng, corpus, 3);
      REQUIRE(spec.sources.size() == 3);
      int anchors = 0;
      std::set<std::string> ids;
      for (int s = 0; s < 3; ++s) {
        ids.insert(spec.sources[s].clip_id);
        if (s == spec.target_index) {
          CHECK(spec.sources[s].snr_db == 0.0);
          ++anchors;
        }
        for (int k = 0; k < s; ++k) {
          CHECK(circular_distance_deg(spec.sources[s].azimuth_deg, spec.sources[k].azimuth_deg) >= 5.0);
        }
      }
      CHECK(anchors == 1);
      CHECK(ids.size() == 3);
      CHECK_NOTHROW(spec.validate(5.0));
    }
    Rng r2(4);
    CHECK_THROWS_AS(sample_scene(r2, noise_corpus(2, 64), 3), ConfigError);
  }

  TEST_CASE("Woodworth ITD") {
    CHECK(itd_seconds(0.0) == 0.0);
    CHECK(itd_seconds(90.0) == doctest::Approx(6.558153894884939e-4).epsilon(1e-12));
    CHECK(itd_seconds(90.0) * 16000 == doctest::Approx(10.493046).epsilon(1e-6));
    CHECK(itd_seconds(180.0) == doctest::Approx(0.0).epsilon(1e-12));
    for (double a = 0.5; a < 360.0; a += 7.25) CHECK(itd_seconds(a) == doctest::Approx(-itd_seconds(360.0 - a)));
    // Front/back mirror images share a lateral angle.
    CHECK(itd_seconds(30.0) == doctest::Approx(itd_seconds(150.0)));
  }

  TEST_CASE("fractional delay") {
    std::vector<double> x(200, 0.0);
    x[50] = 1.0;
    const auto y = fractional_delay(x, 3.0);
    CHECK(y[53] == 1.0);
    const auto z = fractional_delay(x, 2.5);
    CHECK(z[52] == doctest::Approx(z[53]).epsilon(1e-9));
    double sum = 0.0;
    for (double v : z) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("median-plane source yields identical ears") {
    const auto mono = white_noise(4000, 5);
    const auto out = spatialize(mono, 0.0);
    CHECK(out.channels() == 2);
    CHECK(out.frames() == mono.frames());
    CHECK(torch::equal(out.samples()[0], out.samples()[1]));
  }

  TEST_CASE("impulse at 90 degrees: GCC lag matches the Woodworth delay") {
    auto x = torch::zeros({1, 4096}, torch::kFloat64);
    x[0][1500] = 1.0;
    const auto out = spatialize(Waveform(x), 90.0);
    const int expected = static_cast<int>(std::lround(itd_seconds(90.0) * 16000));
    // Source on the right: the left ear lags, which reads as a negative lag.
    CHECK(std::abs(modal_lag(out) + expected) <= 1);
  }

  TEST_CASE("spatial fidelity across the circle") {
    const auto mono = white_noise(16000, 8);
    for (int az = 0; az < 360; az += 30) {
      const auto out = spatialize(mono, az);
      const double expected = -itd_seconds(az) * 16000;
      CHECK_MESSAGE(std::abs(modal_lag(out) - expected) <= 1.0, "azimuth " << az);
    }
  }

  TEST_CASE("spatialization keeps per-channel energy within the ILD bound") {
    const auto mono = white_noise(16000, 12);
    const double e = mono.samples().pow(2).sum().item<double>();
    for (int az = 0; az < 360; az += 15) {
      const auto out = spatialize(mono, az);
      for (int c = 0; c < 2; ++c) {
        const double db = 10.0 * std::log10(out.samples()[c].pow(2).sum().item<double>() / e);
        CHECK(std::abs(db) <= 6.0);
      }
    }
  }

  TEST_CASE("HRIR rendering") {
    auto ir = torch::zeros({2, 32}, torch::kFloat64);
    ir[0][0] = 1.0;
    ir[1][0] = 1.0;
    auto set = std::make_shared<HrirSet>();
    set->add(0, Waveform(ir));
    const auto mono = white_noise(1000, 2);
    const auto out = spatialize(mono, 45.0, Renderer::from_hrirs(set));
    CHECK(torch::equal(out.samples()[0], mono.samples()[0]));
    CHECK(torch::equal(out.samples()[1], mono.samples()[0]));

    CHECK_THROWS_AS(spatialize(mono, 0.0, Renderer::from_hrirs(std::make_shared<HrirSet>())), DataError);
    Renderer no_set;
    no_set.kind = Renderer::Kind::HrirSet;
    CHECK_THROWS_AS(spatialize(mono, 0.0, no_set), DataError);
  }

  TEST_CASE("HRIR directory loader") {
    TempDir dir("hrir");
    auto ir = torch::zeros({2, 16}, torch::kFloat64);
    ir[0][0] = 0.5;
    ir[1][3] = 0.5;
    write_wav(dir.path / "az_90.wav", Waveform(ir));
    write_wav(dir.path / "az_270.wav", Waveform(ir.flip(0)));
    const auto set = HrirSet::from_directory(dir.path);
    CHECK(set.nearest(80.0).samples()[0][0].item<double>() == doctest::Approx(0.5));
    CHECK(set.nearest(260.0).samples()[1][0].item<double>() == doctest::Approx(0.5));
    TempDir empty("hrir_empty");
    CHECK_THROWS_AS(HrirSet::from_directory(empty.path), DataError);
  }

  TEST_CASE("rendered mixtures are exact sums") {
    const auto corpus = noise_corpus(4, 16000);
    SceneSpec spec;
    spec.id = "s0";
    spec.duration_s = 1.0;
    spec.sources = {{"clip0", 30.0, 0.0, "sound0"}, {"clip1", 200.0, 5.0, "sound1"}};
    const auto scene = render_scene(spec, corpus);
    auto sum = scene.sources_binaural[0].samples() + scene.sources_binaural[1].samples();
    CHECK(torch::equal(scene.mixture.samples() - sum, torch::zeros_like(sum)));
    CHECK(torch::equal(scene.target.samples(), scene.sources_binaural[0].samples()));
    CHECK(scene.prompt.text() == "sound0");
    CHECK(scene.target_azimuth_deg == 30.0);
    CHECK(scene.mixture.frames() == scene.target.frames());

    const double measured =
        20.0 * std::log10(downmix_rms(scene.sources_mono[0]) / downmix_rms(scene.sources_mono[1]));
    CHECK(std::abs(measured - 5.0) < 0.01);

    const auto again = render_scene(spec, corpus);
    CHECK(torch::equal(again.mixture.samples(), scene.mixture.samples()));
  }

  TEST_CASE("silent clips trigger resampling") {
    Corpus corpus = noise_corpus(3, 8000);
    corpus.add(ClipRecord{"quiet", "", "nothing"}, Waveform::zeros(1, 8000));
    SceneSpec spec;
    spec.duration_s = 0.5;
    spec.sources = {{"quiet", 10.0, 0.0, "nothing"}, {"clip0", 100.0, 1.0, "sound0"}};
    CHECK_THROWS_AS(render_scene(spec, corpus), DegenerateInputError);

    SamplingConfig cfg;
    cfg.duration_s = 0.5;
    for (uint64_t seed = 0; seed < 20; ++seed) {
      const auto sim = simulate_scene(seed, corpus, 2, cfg);
      for (const auto& s : sim.spec.sources) CHECK(s.clip_id != "quiet");
    }
  }

  TEST_CASE("scene sets serialize as JSON lines") {
    TempDir dir("scenes");
    const auto corpus = noise_corpus(5, 64);
    Rng rng(5);
    std::vector<SceneSpec> scenes;
    for (int i = 0; i < 4; ++i) {
      scenes.push_back(sample_scene(rng, corpus, 2 + i % 2));
      scenes.back().id = "scene" + std::to_string(i);
    }
    write_scene_set(dir.path / "s.jsonl", scenes);
    const auto back = read_scene_set(dir.path / "s.jsonl");
    REQUIRE(back.size() == scenes.size());
    for (size_t i = 0; i < back.size(); ++i) CHECK(nlohmann::json(back[i]) == nlohmann::json(scenes[i]));
  }

  TEST_CASE("manifest loading") {
    TempDir dir("manifest");
    write_wav(dir.path / "a.wav", sine(300.0, 8000, 0.3, 8000));
    write_wav(dir.path / "b.wav", white_noise(20000, 1, 2));
    {
      std::ofstream m(dir.path / "clips.jsonl");
      m << R"({"id": "a", "path": "a.wav", "caption": "low tone"})" << "\n";
      m << R"({"id": "b", "path": "b.wav", "caption": "hiss"})" << "\n";
    }
    const auto corpus = Corpus::from_manifest(dir.path / "clips.jsonl");
    CHECK(corpus.size() == 2);
    CHECK(corpus.find("b").caption == "hiss");
    const auto a = corpus.load_mono("a", 16000, 32000);
    CHECK(a.frames() == 32000);
    CHECK(a.channels() == 1);
    CHECK(a.samples().slice(1, 16000).abs().max().item<double>() == 0.0);
    CHECK(corpus.load_mono("b", 16000, 1000).frames() == 1000);
    CHECK_THROWS_AS(corpus.find("zzz"), DataError);
  }

  TEST_CASE("separation angle") {
    SceneSpec spec;
    spec.sources = {{"a", 10.0, 0.0, "x"}, {"b", 350.0, 0.0, "y"}};
    CHECK(target_separation_deg(spec) == doctest::Approx(20.0));
    spec.sources.push_back({"c", 100.0, 0.0, "z"});
    spec.target_index = 2;
    CHECK(target_separation_deg(spec) == doctest::Approx(90.0));
  }
}
