#include "spectttra/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace spectttra {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

double kaiser(double x, double beta) {
  // x in [-1, 1]
  const double arg = 1.0 - x * x;
  if (arg <= 0.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(arg)) / std::cyl_bessel_i(0.0, beta);
}

}  // namespace

void AudioBuffer::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("audio sample_rate must be positive");
  for (double s : samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("audio contains non-finite samples");
  }
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open WAV file: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();

  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw std::runtime_error("not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_bytes = 0;

  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const unsigned char* chunk = data + pos;
    const std::uint32_t chunk_size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = std::min<std::size_t>(chunk_size, size - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (available < 16) throw std::runtime_error("truncated fmt chunk: " + path.string());
      format = read_u16(data + body);
      channels = read_u16(data + body + 2);
      rate = read_u32(data + body + 4);
      bits = read_u16(data + body + 14);
      if (format == kFormatExtensible) {
        if (available < 26) throw std::runtime_error("truncated extensible fmt: " + path.string());
        // First two bytes of the subformat GUID carry the actual format tag.
        format = read_u16(data + body + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      pcm = data + body;
      pcm_bytes = available;
    }
    pos = body + chunk_size + (chunk_size & 1U);
  }

  if (pcm == nullptr || channels == 0 || rate == 0) {
    throw std::runtime_error("WAV file lacks fmt/data chunks: " + path.string());
  }

  std::size_t bytes_per_sample = 0;
  if (format == kFormatPcm && bits == 16) {
    bytes_per_sample = 2;
  } else if (format == kFormatPcm && bits == 24) {
    bytes_per_sample = 3;
  } else if (format == kFormatFloat && bits == 32) {
    bytes_per_sample = 4;
  } else {
    throw std::runtime_error("unsupported WAV encoding (format " + std::to_string(format) +
                             ", " + std::to_string(bits) + " bits): " + path.string());
  }

  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n_frames = pcm_bytes / frame_bytes;
  AudioBuffer out;
  out.sample_rate = static_cast<int>(rate);
  out.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = pcm + i * frame_bytes + c * bytes_per_sample;
      double v = 0.0;
      if (bytes_per_sample == 2) {
        v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else if (bytes_per_sample == 3) {
        std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
        if (s & 0x800000) s |= ~0xFFFFFF;
        v = s / 8388608.0;
      } else {
        float f;
        std::uint32_t u = read_u32(p);
        std::memcpy(&f, &u, sizeof f);
        v = f;
      }
      acc += v;
    }
    out.samples[i] = acc / channels;
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio, WavEncoding encoding) {
  audio.validate();
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : encoding == WavEncoding::pcm24 ? 24 : 32;
  const std::uint16_t format = encoding == WavEncoding::float32 ? kFormatFloat : kFormatPcm;
  const std::uint32_t block_align = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * block_align);

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * block_align);
  put_u16(out, static_cast<std::uint16_t>(block_align));
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_bytes);

  for (double s : audio.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    if (encoding == WavEncoding::pcm16) {
      const auto v = static_cast<std::int16_t>(std::lround(std::min(c * 32768.0, 32767.0)));
      put_u16(out, static_cast<std::uint16_t>(v));
    } else if (encoding == WavEncoding::pcm24) {
      const auto v = static_cast<std::int32_t>(std::lround(std::min(c * 8388608.0, 8388607.0)));
      out.push_back(static_cast<char>(v & 0xFF));
      out.push_back(static_cast<char>((v >> 8) & 0xFF));
      out.push_back(static_cast<char>((v >> 16) & 0xFF));
    } else {
      const auto f = static_cast<float>(s);
      std::uint32_t u;
      std::memcpy(&u, &f, sizeof u);
      put_u32(out, u);
    }
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write WAV file: " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("failed writing WAV file: " + path.string());
}

AudioBuffer resample(const AudioBuffer& audio, int target_rate) {
  if (audio.samples.empty()) throw std::invalid_argument("resample: empty input");
  if (target_rate <= 0) throw std::invalid_argument("resample: target rate must be positive");
  if (audio.sample_rate <= 0) throw std::invalid_argument("resample: source rate must be positive");
  if (audio.sample_rate == target_rate) return audio;

  constexpr double kZeroCrossings = 32.0;
  constexpr double kBeta = 8.6;
  constexpr double kRolloff = 0.97;

  const auto n_in = static_cast<std::int64_t>(audio.samples.size());
  const std::int64_t n_out =
      (n_in * target_rate + audio.sample_rate / 2) / audio.sample_rate;
  const double step = static_cast<double>(audio.sample_rate) / target_rate;
  const double cutoff = std::min(1.0, 1.0 / step) * kRolloff;  // fraction of input Nyquist
  const double half_width = kZeroCrossings / cutoff;               // in input samples

  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (std::int64_t n = 0; n < n_out; ++n) {
    const double x = n * step;
    const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(x - half_width)));
    const auto hi = std::min<std::int64_t>(n_in - 1, static_cast<std::int64_t>(std::floor(x + half_width)));
    double acc = 0.0;
    for (std::int64_t k = lo; k <= hi; ++k) {
      const double d = x - static_cast<double>(k);
      const double arg = std::numbers::pi * cutoff * d;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      acc += audio.samples[static_cast<std::size_t>(k)] * cutoff * sinc * kaiser(d / half_width, kBeta);
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

AudioBuffer slice(const AudioBuffer& audio, std::size_t start, std::size_t length) {
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  if (start >= audio.samples.size()) return out;
  const std::size_t end = std::min(audio.samples.size(), start + length);
  out.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     audio.samples.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

}  // namespace spectttra
