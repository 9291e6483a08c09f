#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "fixtures.hpp"
#include "luseel/audio.hpp"
#include "luseel/errors.hpp"
#include "luseel/wav_io.hpp"

using namespace luseel;
using namespace luseel::testing;

namespace {

double max_abs(const torch::Tensor& t) { return t.abs().max().item<double>(); }

double rel_l2(const torch::Tensor& a, const torch::Tensor& b) {
  return ((a - b).norm() / b.norm()).item<double>();
}

}  // namespace

TEST_SUITE("audio_core") {
  TEST_CASE("waveform validates shape and values") {
    CHECK_THROWS_AS(Waveform(torch::zeros({3, 10}, torch::kFloat64)), InputError);
    CHECK_THROWS_AS(Waveform(torch::zeros({1, 0}, torch::kFloat64)), InputError);
    CHECK_THROWS_AS(Waveform(torch::zeros({1, 10}, torch::kFloat64), 0), InputError);
    auto bad = torch::zeros({1, 4}, torch::kFloat64);
    bad[0][2] = std::nan("");
    CHECK_THROWS_AS(Waveform{bad}, InputError);
    CHECK(Waveform::zeros(2, 5).channels() == 2);
  }

  TEST_CASE("stft of silence is exactly zero") {
    auto s = stft(Waveform::zeros(1, 16000), 1024, 256);
    CHECK(s.freq_bins() == 513);
    CHECK(max_abs(torch::view_as_real(s.bins)) == 0.0);
  }

  TEST_CASE("stft frame count uses centre padding") {
    CHECK(stft(Waveform::zeros(1, 16000), 1024, 256).time_frames() == stft_frame_count(16000, 256));
    CHECK(stft_frame_count(160000, 256) == 626);
  }

  TEST_CASE("1 kHz tone peaks in bin 64 and matches a direct DFT") {
    const auto tone = sine(1000.0, 16000);
    auto s = stft(tone, 1024, 256);
    auto mag = s.bins.abs()[0];  // [F, T]
    for (int64_t t = 4; t < s.time_frames() - 4; ++t) {
      CHECK(mag.select(1, t).argmax().item<int64_t>() == 64);
    }

    // Direct DFT of interior frame 10: centred at sample 2560, periodic Hann.
    const int n = 1024;
    const int64_t frame = 10;
    const int64_t start = frame * 256 - n / 2;
    auto x = tone.samples()[0];
    for (int k : {60, 64, 70}) {
      std::complex<double> acc{0.0, 0.0};
      for (int i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
        const double v = x[start + i].item<double>() * w;
        acc += v * std::polar(1.0, -2.0 * std::numbers::pi * k * i / n);
      }
      const auto got = s.bins[0][k][frame];
      CHECK(torch::real(got).item<double>() == doctest::Approx(acc.real()).epsilon(1e-9));
      CHECK(torch::imag(got).item<double>() == doctest::Approx(acc.imag()).epsilon(1e-9));
    }
  }

  TEST_CASE("stft rejects bad sizes") {
    const auto w = Waveform::zeros(1, 4096);
    CHECK_THROWS_AS(stft(w, 0, 256), ConfigError);
    CHECK_THROWS_AS(stft(w, 1024, -1), ConfigError);
    CHECK_THROWS_AS(stft(w, 1000, 250), ConfigError);
    CHECK_THROWS_AS(stft(w, 256, 512), ConfigError);
  }

  TEST_CASE("istft inverts stft") {
    const auto tone = sine(440.0, 16000);
    CHECK(max_abs(istft(stft(tone), 16000).samples() - tone.samples()) < 1e-4);

    const auto noise = white_noise(16000, 3);
    CHECK(rel_l2(istft(stft(noise), 16000).samples(), noise.samples()) < 1e-4);

    Spectrogram zero{torch::zeros({1, 513, 63}, torch::kComplexDouble), 1024, 256, WindowKind::Hann};
    CHECK(max_abs(istft(zero, 16000).samples()) == 0.0);
  }

  TEST_CASE("istft rejects windows without overlap-add reconstruction") {
    Spectrogram s{torch::zeros({1, 513, 20}, torch::kComplexDouble), 1024, 1024, WindowKind::Hann};
    CHECK_THROWS_AS(istft(s, 4096), ConfigError);
  }

  TEST_CASE("round trip property over random lengths and sizes") {
    Rng rng(11);
    for (int trial = 0; trial < 12; ++trial) {
      const int fft = 256 << rng.index(3);
      const int64_t frames = fft + static_cast<int64_t>(rng.index(20000));
      const int channels = 1 + static_cast<int>(rng.index(2));
      const auto w = white_noise(frames, 100 + trial, channels);
      const auto back = istft(stft(w, fft, fft / 4), frames);
      CHECK(back.channels() == channels);
      CHECK(rel_l2(back.samples(), w.samples()) < 1e-4);
    }
  }

  TEST_CASE("spectrogram energy is proportional to waveform energy") {
    const int fft = 1024, hop = 256;
    const auto w = white_noise(64000, 5);
    auto s = stft(w, fft, hop);
    auto power = s.bins.abs().pow(2)[0];
    auto weights = torch::full({power.size(0), 1}, 2.0, torch::kFloat64);
    weights[0][0] = 1.0;
    weights[fft / 2][0] = 1.0;
    const double spec_energy = (power * weights).sum().item<double>();
    // Overlap-added squared Hann windows sum to 3/8 * fft / hop.
    const double expected = fft * (3.0 / 8.0) * fft / hop * w.samples().pow(2).sum().item<double>();
    CHECK(std::abs(spec_energy / expected - 1.0) < 0.01);
  }

  TEST_CASE("rms") {
    CHECK(rms(Waveform(torch::full({1, 100}, 0.5, torch::kFloat64)))[0] == doctest::Approx(0.5));
    CHECK(rms(Waveform::zeros(1, 10))[0] == 0.0);
    CHECK(rms(Waveform::from_vector({3.0, 4.0}))[0] == doctest::Approx(std::sqrt(12.5)));
    const auto two = Waveform(torch::tensor({{1.0, 1.0}, {2.0, 2.0}}, torch::kFloat64));
    CHECK(rms(two).size() == 2);
  }

  TEST_CASE("gain_for_snr") {
    const auto a = white_noise(8000, 1);
    const auto b = a.scaled(1.0);
    CHECK(gain_for_snr(a, b, 0.0) == doctest::Approx(1.0));
    CHECK(gain_for_snr(a, b, 20.0) == doctest::Approx(0.1));

    const auto anchor = Waveform(torch::full({1, 100}, 0.2, torch::kFloat64));
    const auto interferer = Waveform(torch::full({1, 100}, 0.1, torch::kFloat64));
    CHECK(gain_for_snr(anchor, interferer, 0.0) == doctest::Approx(2.0));

    CHECK_THROWS_AS(gain_for_snr(Waveform::zeros(1, 100), interferer, 0.0), DegenerateInputError);
    CHECK_THROWS_AS(gain_for_snr(anchor, Waveform::zeros(1, 100), 0.0), DegenerateInputError);
  }

  TEST_CASE("scaling by gain_for_snr lands on the requested SNR") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      const auto a = white_noise(4000, 200 + trial, 1 + trial % 2, rng.uniform(0.01, 1.0));
      const auto b = white_noise(4000, 400 + trial, 1 + trial % 2, rng.uniform(0.01, 1.0));
      const double snr = rng.uniform(-10.0, 10.0);
      const auto scaled = b.scaled(gain_for_snr(a, b, snr));
      const double measured = 20.0 * std::log10(downmix_rms(a) / downmix_rms(scaled));
      CHECK(std::abs(measured - snr) < 0.01);
    }
  }

  TEST_CASE("wave files round trip through 16-bit PCM") {
    TempDir dir("wav");
    const auto w = white_noise(1000, 9, 2, 0.2);
    write_wav(dir.path / "x.wav", w);
    const auto back = read_wav(dir.path / "x.wav");
    CHECK(back.channels() == 2);
    CHECK(back.sample_rate() == kDefaultSampleRate);
    CHECK(max_abs(back.samples() - w.samples()) <= 1.0 / 32768.0);
    CHECK_THROWS_AS(read_wav(dir.path / "missing.wav"), DataError);
  }

  TEST_CASE("resampling to 16 kHz") {
    const auto tone = sine(200.0, 8000, 0.5, 8000);
    const auto up = resample_linear(tone, 16000);
    CHECK(up.sample_rate() == 16000);
    CHECK(up.frames() == 16000);
    // Linear interpolation of a slow tone stays close to the analytic signal.
    const auto ref = sine(200.0, 16000);
    CHECK(max_abs((up.samples() - ref.samples()).slice(1, 0, 15990)) < 0.01);
  }
}
