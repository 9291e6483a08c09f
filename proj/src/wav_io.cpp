#include "luseel/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "luseel/errors.hpp"

namespace luseel {

namespace {

uint32_t read_u32(const uint8_t* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}
uint16_t read_u16(const uint8_t* p) { return uint16_t(p[0] | (p[1] << 8)); }

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t((v >> (8 * i)) & 0xFF));
}
void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v & 0xFF));
  out.push_back(uint8_t(v >> 8));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_wav: cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError("read_wav: not a RIFF/WAVE file: " + path.string());
  }

  int channels = 0, rate = 0, bits = 0, format = 0;
  const uint8_t* data = nullptr;
  size_t data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* chunk = bytes.data() + pos;
    const uint32_t len = read_u32(chunk + 4);
    const size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0 && len >= 16 && body + 16 <= bytes.size()) {
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = static_cast<int>(read_u32(bytes.data() + body + 4));
      bits = read_u16(bytes.data() + body + 14);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = std::min<size_t>(len, bytes.size() - body);
    }
    pos = body + len + (len & 1);
  }
  // 0xFFFE (extensible) is accepted when the payload is plain 16-bit PCM.
  if ((format != 1 && format != 0xFFFE) || bits != 16) {
    throw DataError("read_wav: only 16-bit PCM is supported: " + path.string());
  }
  if (channels < 1 || channels > 2) throw DataError("read_wav: unsupported channel count");
  if (data == nullptr) throw DataError("read_wav: missing data chunk");

  const int64_t frames = static_cast<int64_t>(data_len / (2 * channels));
  if (frames < 1) throw DataError("read_wav: empty data chunk: " + path.string());
  auto samples = torch::empty({channels, frames}, torch::kFloat64);
  auto acc = samples.accessor<double, 2>();
  for (int64_t f = 0; f < frames; ++f) {
    for (int c = 0; c < channels; ++c) {
      const auto raw = static_cast<int16_t>(read_u16(data + 2 * (f * channels + c)));
      acc[c][f] = raw / 32768.0;
    }
  }
  return Waveform(samples, rate);
}

Waveform resample_linear(const Waveform& w, int target_rate) {
  if (target_rate <= 0) throw ConfigError("resample: target rate must be positive");
  if (target_rate == w.sample_rate()) return w;
  const int64_t in_frames = w.frames();
  const int64_t out_frames = std::max<int64_t>(
      1, std::llround(static_cast<double>(in_frames) * target_rate / w.sample_rate()));
  auto out = torch::empty({w.channels(), out_frames}, torch::kFloat64);
  auto src = w.samples().accessor<double, 2>();
  auto dst = out.accessor<double, 2>();
  const double step = static_cast<double>(w.sample_rate()) / target_rate;
  for (int64_t n = 0; n < out_frames; ++n) {
    const double t = n * step;
    const auto i0 = std::min<int64_t>(static_cast<int64_t>(t), in_frames - 1);
    const auto i1 = std::min<int64_t>(i0 + 1, in_frames - 1);
    const double frac = t - static_cast<double>(i0);
    for (int c = 0; c < w.channels(); ++c) dst[c][n] = (1.0 - frac) * src[c][i0] + frac * src[c][i1];
  }
  return Waveform(out, target_rate);
}

Waveform read_wav_resampled(const std::filesystem::path& path, int target_rate) {
  return resample_linear(read_wav(path), target_rate);
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const int channels = w.channels();
  const int64_t frames = w.frames();
  const uint32_t data_len = static_cast<uint32_t>(frames * channels * 2);
  std::vector<uint8_t> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, static_cast<uint16_t>(channels));
  put_u32(out, static_cast<uint32_t>(w.sample_rate()));
  put_u32(out, static_cast<uint32_t>(w.sample_rate() * channels * 2));
  put_u16(out, static_cast<uint16_t>(channels * 2));
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_len);
  auto acc = w.samples().accessor<double, 2>();
  for (int64_t f = 0; f < frames; ++f) {
    for (int c = 0; c < channels; ++c) {
      const double v = std::clamp(acc[c][f], -1.0, 1.0);
      const auto q = static_cast<int16_t>(std::lround(std::clamp(v * 32768.0, -32768.0, 32767.0)));
      put_u16(out, static_cast<uint16_t>(q));
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("write_wav: cannot open " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace luseel
