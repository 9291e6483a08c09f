#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "luseel/errors.hpp"
#include "luseel/localization.hpp"
#include "luseel/scene.hpp"

using namespace luseel;
using namespace luseel::testing;

namespace {

// Right channel is the left channel delayed by `k` samples (k may be negative).
Waveform delayed_pair(int64_t frames, int k, uint64_t seed) {
  const auto src = white_noise(frames + 64, seed).samples()[0];
  auto left = src.slice(0, 32, 32 + frames);
  auto right = src.slice(0, 32 - k, 32 - k + frames);
  return Waveform(torch::stack({left, right}));
}

// Time-domain cross-correlation of the same windowed frame; lag l scores
// sum_n L[n] * R[n + l].
int direct_xcorr_argmax(const torch::Tensor& l, const torch::Tensor& r, int max_lag) {
  const int64_t n = l.size(0);
  auto la = l.accessor<double, 1>();
  auto ra = r.accessor<double, 1>();
  int best = 0;
  double best_v = -1e300;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const int64_t j = i + lag;
      if (j >= 0 && j < n) acc += la[i] * ra[j];
    }
    if (acc > best_v) {
      best_v = acc;
      best = lag;
    }
  }
  return best;
}

int64_t count_params(torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

}  // namespace

TEST_SUITE("localization") {
  TEST_CASE("identical channels give zero lag") {
    const auto mono = white_noise(8000, 1).samples()[0];
    const auto gcc = gcc_phat(Waveform(torch::stack({mono, mono})));
    CHECK(gcc.values.size(1) == 33);
    for (int64_t f = 0; f < gcc.values.size(0); ++f) CHECK(gcc.argmax_lag(f) == 0);
  }

  TEST_CASE("right delayed by 3 samples reads as lag +3, matching direct cross-correlation") {
    const auto pair = delayed_pair(8000, 3, 2);
    GccConfig cfg;
    const auto gcc = gcc_phat(pair, cfg);
    const auto window = torch::hann_window(cfg.frame_size, torch::kFloat64);
    for (int64_t f = 0; f < gcc.values.size(0); ++f) {
      CHECK(gcc.argmax_lag(f) == 3);
      const int64_t start = f * cfg.hop_size;
      auto l = (pair.samples()[0].slice(0, start, start + cfg.frame_size) * window).contiguous();
      auto r = (pair.samples()[1].slice(0, start, start + cfg.frame_size) * window).contiguous();
      CHECK(direct_xcorr_argmax(l, r, cfg.max_lag) == 3);
    }
  }

  TEST_CASE("silent frames produce zero rows") {
    auto x = torch::zeros({2, 4096}, torch::kFloat64);
    x.slice(1, 2048) = white_noise(2048, 3, 2).samples();
    const auto gcc = gcc_phat(Waveform(x));
    CHECK(gcc.values[0].abs().sum().item<double>() == 0.0);
    CHECK(gcc.values[gcc.values.size(0) - 1].abs().sum().item<double>() > 0.0);
    CHECK(gcc.values.abs().max().item<double>() <= 1.0);
  }

  TEST_CASE("integer and fractional delays are recovered") {
    for (int k = -10; k <= 10; ++k) {
      const auto gcc = gcc_phat(delayed_pair(8000, k, 10 + k));
      int hits = 0, active = 0;
      for (int64_t f = 0; f < gcc.values.size(0); ++f) {
        ++active;
        hits += gcc.argmax_lag(f) == k;
      }
      CHECK_MESSAGE(hits >= 0.99 * active, "delay " << k);
    }
    const auto mono = white_noise(8000, 4);
    for (double d : {2.3, 5.5, 7.8}) {
      const auto delayed = fractional_delay(
          std::vector<double>(mono.samples().data_ptr<double>(), mono.samples().data_ptr<double>() + 8000), d);
      auto r = torch::tensor(delayed, torch::kFloat64);
      const auto gcc = gcc_phat(Waveform(torch::stack({mono.samples()[0], r})));
      for (int64_t f = 1; f < gcc.values.size(0); ++f) CHECK(std::abs(gcc.argmax_lag(f) - d) <= 1.0);
    }
  }

  TEST_CASE("gcc_phat preconditions") {
    CHECK_THROWS_AS(gcc_phat(white_noise(1000, 1)), InputError);
    GccConfig cfg;
    cfg.max_lag = 300;
    CHECK_THROWS_AS(gcc_phat(white_noise(1000, 1, 2), cfg), ConfigError);
  }

  TEST_CASE("gaussian labels") {
    const auto y = gaussian_label(0.0, 5.0);
    REQUIRE(y.probs.size() == 360);
    CHECK(y.probs[0] == doctest::Approx(0.1784124116152771).epsilon(1e-12));
    CHECK(y.probs[180] < 1e-300);
    CHECK(y.probs[1] == doctest::Approx(y.probs[359]).epsilon(1e-15));
    const auto w = gaussian_label(359.5, 5.0);
    CHECK(w.probs[359] == w.probs[0]);
    CHECK_THROWS_AS(gaussian_label(360.0), InputError);
    CHECK_THROWS_AS(gaussian_label(-1.0), InputError);
    CHECK_THROWS_AS(gaussian_label(10.0, 0.0), InputError);

    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
      const double d = rng.uniform(0.0, 360.0);
      const auto lab = gaussian_label(d);
      CHECK(decode_azimuth(lab) == std::fmod(std::round(d), 360.0));
      // Density depends only on circular distance to d.
      const int lo = static_cast<int>(std::floor(d));
      const double left = lab.probs[static_cast<size_t>((lo - 3 + 360) % 360)];
      const double dist = circular_distance_deg(lo - 3, d);
      CHECK(left == doctest::Approx(0.1784124116152771 * std::exp(-dist * dist / 10.0)).epsilon(1e-9));
    }
  }

  TEST_CASE("decode_azimuth") {
    DoADistribution one_hot{std::vector<double>(360, 0.0)};
    one_hot.probs[42] = 1.0;
    CHECK(decode_azimuth(one_hot) == 42.0);
    CHECK(decode_azimuth(gaussian_label(90.0)) == 90.0);
    CHECK(decode_azimuth(DoADistribution{std::vector<double>(360, 0.3)}) == 0.0);
  }

  TEST_CASE("tap projection widths") {
    TapProjection full(5, 1256, 100);
    std::vector<torch::Tensor> taps(5, torch::randn({1, 1256, 7}));
    CHECK(full->forward(taps).size(1) == 500);
    CHECK(full->out_channels() == 500);
    TapProjection toy(5, 64, 8);
    std::vector<torch::Tensor> small(5, torch::randn({2, 64, 9}));
    CHECK(toy->forward(small).size(1) == 40);
    small[3] = torch::randn({2, 64, 10});
    CHECK_THROWS_AS(toy->forward(small), Error);
  }

  TEST_CASE("F-DoA encoder") {
    FdoaEncoder full(500, std::vector<int64_t>{512, 256}, 8, 0.1);
    std::vector<std::vector<int64_t>> shapes;
    for (const auto& p : full->named_parameters()) {
      if (p.key().find("weight") != std::string::npos) shapes.push_back(p.value().sizes().vec());
    }
    REQUIRE(shapes.size() == 3);
    CHECK(shapes[0] == std::vector<int64_t>{512, 500, 1});
    CHECK(shapes[1] == std::vector<int64_t>{256, 512, 1});
    CHECK(shapes[2] == std::vector<int64_t>{1, 256, 1});

    FdoaEncoder toy(40, std::vector<int64_t>{64, 32}, 8, 0.1);
    toy->eval();
    for (int64_t t : {20, 63, 626}) CHECK(toy->forward(torch::randn({3, 40, t})).sizes() == torch::IntArrayRef{3, 8});
    const auto x = torch::randn({2, 40, 50});
    CHECK(torch::equal(toy->forward(x), toy->forward(x)));
    CHECK_THROWS_AS(toy->forward(torch::randn({2, 41, 50})), ConfigError);
  }

  TEST_CASE("DoA decoder") {
    DoaDecoder full(888, std::vector<int64_t>{1024, 1024, 1024, 1024, 1024}, 360, 0.1);
    full->eval();
    const auto out = full->forward(torch::randn({2, 888}));
    CHECK(out.sizes() == torch::IntArrayRef{2, 360});
    CHECK(out.gt(0).all().item<bool>());
    CHECK(out.lt(1).all().item<bool>());
    CHECK_THROWS_AS(full->forward(torch::randn({2, 887})), ConfigError);

    DoaDecoder toy(41, std::vector<int64_t>{32, 32, 32, 32, 32}, 360, 0.1);
    toy->train();
    toy->forward(torch::randn({8, 41}));  // populate running statistics
    toy->eval();
    const auto batch = torch::randn({4, 41});
    const auto together = toy->forward(batch);
    for (int i = 0; i < 4; ++i) {
      CHECK(torch::allclose(together[i], toy->forward(batch.slice(0, i, i + 1))[0], 1e-6, 1e-7));
    }
  }

  TEST_CASE("localization head with and without GCC") {
    LocalizationConfig cfg;
    cfg.tap_in = 16;
    LocalizationHead with_gcc(cfg);
    cfg.use_gcc = false;
    LocalizationHead without(cfg);
    CHECK(cfg.decoder_input() == cfg.pooled_len);
    // Only the first decoder layer differs: 33 extra input columns.
    CHECK(count_params(*with_gcc) - count_params(*without) == 33 * cfg.decoder_hidden[0]);

    with_gcc->eval();
    without->eval();
    std::vector<torch::Tensor> taps(5, torch::randn({2, 16, 30}));
    const auto gcc = torch::rand({2, 12, 33});
    CHECK(with_gcc->forward(taps, gcc).sizes() == torch::IntArrayRef{2, 360});
    CHECK(without->forward(taps).sizes() == torch::IntArrayRef{2, 360});
    CHECK_THROWS_AS(with_gcc->forward(taps), ConfigError);
  }
}
