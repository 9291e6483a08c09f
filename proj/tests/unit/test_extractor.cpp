#include "doctest.h"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "luseel/errors.hpp"
#include "luseel/extractor.hpp"

using namespace luseel;
using namespace luseel::testing;

namespace {

ExtractorConfig tiny_config() {
  ExtractorConfig cfg;
  cfg.base_width = 2;
  cfg.d_model = 4;
  cfg.ff_dim = 8;
  cfg.d_cond = 3;
  cfg.fft_size = 256;
  cfg.hop_size = 64;
  return cfg;
}

std::vector<torch::Tensor> param_list(torch::nn::Module& m) {
  std::vector<torch::Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p);
  return out;
}

}  // namespace

TEST_SUITE("extractor") {
  TEST_CASE("config geometry") {
    const ExtractorConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.layout() == "SCSCS");
    CHECK(cfg.widths() == std::vector<int64_t>{16, 32, 64, 64});
    CHECK(cfg.time_downsampling() == 256);
    CHECK(cfg.freq_fold() == 8);
    CHECK(cfg.time_frames(160000) == 625);
    CHECK(cfg.spectral_frames(160000) == 626);
    ExtractorConfig bad = cfg;
    bad.channels_in = 3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.n_heads = 3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("encoders") {
    torch::manual_seed(0);
    Extractor net(ExtractorConfig{});
    const auto x = torch::randn({1, 2, 160000}) * 0.1;
    const auto time = net->encode_time(x);
    REQUIRE(time.size() == 4);
    CHECK(time.back().sizes() == torch::IntArrayRef{1, 64, 625});
    const auto zero = net->encode_time(torch::zeros({1, 2, 4096}));
    CHECK(torch::isfinite(zero.back()).all().item<bool>());
    CHECK_THROWS_AS(net->encode_time(torch::zeros({1, 1, 4096})), InputError);

    const auto tone = torch::stack({sine(440.0, 16000, 0.5).samples()[0], sine(440.0, 16000, 0.5).samples()[0]})
                          .unsqueeze(0)
                          .to(torch::kFloat32);
    const auto spec = stft_tensor(tone, 1024, 256);
    auto ri = torch::view_as_real(spec.slice(2, 0, 512)).permute({0, 1, 4, 2, 3}).reshape({1, 4, 512, -1});
    const auto freq = net->encode_freq(ri);
    REQUIRE(freq.size() == 4);
    CHECK(freq.back().size(1) == 64);
    CHECK(freq.back().size(2) == 1);
    CHECK(freq.back().size(3) == 63);
    const auto silent = net->encode_freq(torch::zeros_like(ri));
    CHECK((freq.back() - silent.back()).norm().item<double>() > 1e-3);
    CHECK_THROWS_AS(net->encode_freq(torch::zeros({1, 2, 512, 10})), InputError);
  }

  TEST_CASE("FiLM") {
    torch::manual_seed(1);
    Film film(5, 4);
    const auto h = torch::randn({2, 4, 7});
    const auto cond = torch::randn({2, 5});
    CHECK(torch::allclose(film->forward(h, cond), h));

    {
      torch::NoGradGuard guard;
      film->gamma_map()->bias.fill_(2.0);
    }
    CHECK(torch::allclose(film->forward(h, cond), 2.0 * h));
    {
      torch::NoGradGuard guard;
      film->gamma_map()->bias.fill_(1.0);
      film->beta_map()->bias.fill_(0.5);
    }
    CHECK(torch::allclose(film->forward(h, cond), h + 0.5));
    CHECK_THROWS_AS(film->forward(torch::randn({2, 3, 7}), cond), ConfigError);
    CHECK_THROWS_AS(film->forward(h, torch::randn({2, 6})), ConfigError);

    Film dfilm(3, 4);
    dfilm->to(torch::kFloat64);
    {
      torch::NoGradGuard guard;
      for (auto& p : dfilm->parameters()) p.normal_();
    }
    const auto hd = torch::randn({2, 4, 5}, torch::kFloat64);
    const auto cd = torch::randn({2, 3}, torch::kFloat64);
    const auto w = torch::randn({2, 4, 5}, torch::kFloat64);
    const auto r = grad_check([&] { return (dfilm->forward(hd, cd) * w).sum(); }, param_list(*dfilm), 30, 5);
    CHECK(r.max_rel_error < 1e-3);
  }

  TEST_CASE("forward preserves shape and exposes five spectral taps") {
    torch::manual_seed(2);
    Extractor net(ExtractorConfig{});
    net->eval();
    torch::NoGradGuard guard;
    const auto out = net->forward(torch::randn({1, 2, 160000}) * 0.1, torch::randn({1, 64}));
    CHECK(out.estimate.sizes() == torch::IntArrayRef{1, 2, 160000});
    REQUIRE(out.taps.size() == 5);
    for (const auto& t : out.taps) CHECK(t.sizes() == torch::IntArrayRef{1, 64, 626});

    ExtractorConfig mono_cfg;
    mono_cfg.channels_in = 1;
    Extractor mono(mono_cfg);
    CHECK(mono->forward(torch::randn({2, 1, 5000}), torch::randn({2, 64})).estimate.sizes() ==
          torch::IntArrayRef{2, 1, 5000});
    CHECK_THROWS_AS(net->forward(torch::randn({1, 1, 5000}), torch::randn({1, 64})), InputError);
    CHECK_THROWS_AS(net->forward(torch::randn({1, 2, 500}), torch::randn({1, 64})), InputError);
  }

  TEST_CASE("FiLM layers start at identity for every self-attention stage") {
    Extractor net(ExtractorConfig{});
    int films = 0;
    for (const auto& item : net->named_modules()) {
      if (auto* film = item.value()->as<FilmImpl>()) {
        ++films;
        CHECK(film->gamma_map()->weight.abs().max().item<double>() == 0.0);
        CHECK(torch::all(film->gamma_map()->bias.eq(1.0)).item<bool>());
        CHECK(film->beta_map()->weight.abs().max().item<double>() == 0.0);
        CHECK(film->beta_map()->bias.abs().max().item<double>() == 0.0);
      }
    }
    CHECK(films == 6);
  }

  TEST_CASE("extract on waveforms") {
    torch::manual_seed(3);
    Extractor net(ExtractorConfig{});
    net->eval();
    ConditioningEmbedding cond{torch::randn({2, 64}), torch::randn({64})};
    const auto result = extract(net, white_noise(8000, 1, 2), cond);
    CHECK(result.estimate.channels() == 2);
    CHECK(result.estimate.frames() == 8000);
    CHECK(result.taps.size() == 5);
    CHECK_NOTHROW(extract(net, Waveform::zeros(2, 8000, 16000), cond));
  }

  TEST_CASE("end-to-end gradients match finite differences") {
    torch::manual_seed(4);
    Extractor net(tiny_config());
    net->to(torch::kFloat64);
    {
      torch::NoGradGuard guard;
      for (auto& item : net->named_modules()) {
        if (auto* film = item.value()->as<FilmImpl>()) {
          film->gamma_map()->weight.normal_(0.0, 0.3);
          film->beta_map()->weight.normal_(0.0, 0.3);
        }
      }
    }
    const auto x = white_noise(512, 2, 2).samples().unsqueeze(0);
    const auto cond = torch::randn({1, 3}, torch::kFloat64);
    const auto w = torch::randn({1, 2, 512}, torch::kFloat64);
    const auto r = grad_check([&] { return (net->forward(x, cond).estimate * w).sum(); }, param_list(*net), 80, 6);
    CHECK(r.max_rel_error < 1e-3);
  }
}
