#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "spectttra/audio.hpp"

using namespace spectttra;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "spectttra_test_audio";
  fs::create_directories(dir);
  return dir / name;
}

AudioBuffer sine(double hz, double seconds, int sr, double amp = 0.5) {
  AudioBuffer a;
  a.sample_rate = sr;
  const auto n = static_cast<std::size_t>(seconds * sr);
  for (std::size_t i = 0; i < n; ++i) a.samples.push_back(amp * std::sin(2.0 * std::numbers::pi * hz * i / sr));
  return a;
}

// Frequency of the largest DFT bin, by direct evaluation over a coarse grid.
double peak_frequency(const AudioBuffer& a) {
  double best_hz = 0.0, best = -1.0;
  for (double hz = 50.0; hz < a.sample_rate / 2.0; hz += 5.0) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      acc += a.samples[i] * std::polar(1.0, -2.0 * std::numbers::pi * hz * i / a.sample_rate);
    }
    if (std::abs(acc) > best) {
      best = std::abs(acc);
      best_hz = hz;
    }
  }
  return best_hz;
}

void put_u16(std::ofstream& f, std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); }
void put_u32(std::ofstream& f, std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }

}  // namespace

TEST(Wav, Pcm16RoundTripWithinQuantization) {
  const auto a = sine(440.0, 0.1, 16000);
  const auto path = temp_file("pcm16.wav");
  write_wav(path, a, WavEncoding::pcm16);
  const auto b = read_wav(path);
  ASSERT_EQ(b.sample_rate, 16000);
  ASSERT_EQ(b.samples.size(), a.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_NEAR(a.samples[i], b.samples[i], 1.0 / 32767.0);
}

TEST(Wav, Pcm24RoundTripWithinQuantization) {
  const auto a = sine(1000.0, 0.05, 22050);
  const auto path = temp_file("pcm24.wav");
  write_wav(path, a, WavEncoding::pcm24);
  const auto b = read_wav(path);
  ASSERT_EQ(b.samples.size(), a.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_NEAR(a.samples[i], b.samples[i], 1.0 / 8388607.0);
}

TEST(Wav, Float32RoundTripIsExactToSinglePrecision) {
  const auto a = sine(1000.0, 0.05, 44100);
  const auto path = temp_file("f32.wav");
  write_wav(path, a, WavEncoding::float32);
  const auto b = read_wav(path);
  ASSERT_EQ(b.samples.size(), a.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(b.samples[i], static_cast<double>(static_cast<float>(a.samples[i])));
  }
}

TEST(Wav, StereoIsAveragedToMono) {
  const auto path = temp_file("stereo.wav");
  {
    std::ofstream f(path, std::ios::binary);
    const std::int16_t frames[][2] = {{1000, 3000}, {-2000, 2000}, {32767, -32767}};
    f.write("RIFF", 4);
    put_u32(f, 36 + sizeof frames);
    f.write("WAVEfmt ", 8);
    put_u32(f, 16);
    put_u16(f, 1);
    put_u16(f, 2);
    put_u32(f, 8000);
    put_u32(f, 8000 * 4);
    put_u16(f, 4);
    put_u16(f, 16);
    f.write("data", 4);
    put_u32(f, sizeof frames);
    f.write(reinterpret_cast<const char*>(frames), sizeof frames);
  }
  const auto a = read_wav(path);
  ASSERT_EQ(a.samples.size(), 3u);
  EXPECT_EQ(a.sample_rate, 8000);
  EXPECT_NEAR(a.samples[0], 2000.0 / 32768.0, 1e-12);
  EXPECT_NEAR(a.samples[1], 0.0, 1e-12);
  EXPECT_NEAR(a.samples[2], 0.0, 1e-12);
}

TEST(Wav, RejectsUnsupportedEncodingAndGarbage) {
  const auto path = temp_file("u8.wav");
  {
    std::ofstream f(path, std::ios::binary);
    f.write("RIFF", 4);
    put_u32(f, 40);
    f.write("WAVEfmt ", 8);
    put_u32(f, 16);
    put_u16(f, 1);
    put_u16(f, 1);
    put_u32(f, 8000);
    put_u32(f, 8000);
    put_u16(f, 1);
    put_u16(f, 8);
    f.write("data", 4);
    put_u32(f, 4);
    f.write("\x80\x80\x80\x80", 4);
  }
  EXPECT_THROW(read_wav(path), std::runtime_error);
  const auto junk = temp_file("junk.wav");
  std::ofstream(junk) << "not a wav file";
  EXPECT_THROW(read_wav(junk), std::runtime_error);
  EXPECT_THROW(read_wav(temp_file("missing.wav")), std::runtime_error);
}

TEST(Resample, PreservesToneFrequencyAndLength) {
  const auto a = sine(1000.0, 0.25, 44100);
  const auto b = resample(a, 16000);
  EXPECT_EQ(b.sample_rate, 16000);
  EXPECT_EQ(b.samples.size(), static_cast<std::size_t>(std::llround(a.samples.size() * 16000.0 / 44100.0)));
  EXPECT_NEAR(peak_frequency(b), 1000.0, 5.0);
}

TEST(Resample, UpsamplingKeepsTone) {
  const auto a = sine(3000.0, 0.1, 8000);
  const auto b = resample(a, 16000);
  EXPECT_EQ(b.samples.size(), 2 * a.samples.size());
  EXPECT_NEAR(peak_frequency(b), 3000.0, 5.0);
}

TEST(Resample, AttenuatesContentAboveTargetNyquist) {
  // 7 kHz cannot exist at 8 kHz sampling; what survives must be small.
  const auto a = sine(7000.0, 0.2, 44100);
  const auto b = resample(a, 8000);
  double energy = 0.0;
  for (std::size_t i = b.samples.size() / 4; i < 3 * b.samples.size() / 4; ++i) energy += b.samples[i] * b.samples[i];
  const double rms = std::sqrt(energy / (b.samples.size() / 2));
  EXPECT_LT(rms, 0.01);
}

TEST(Resample, EqualRateIsIdentity) {
  const auto a = sine(123.0, 0.01, 16000);
  const auto b = resample(a, 16000);
  EXPECT_EQ(a.samples, b.samples);
}

TEST(Slice, ClampsToBuffer) {
  const auto a = sine(100.0, 0.01, 16000);
  EXPECT_EQ(slice(a, 10, 20).samples.size(), 20u);
  EXPECT_EQ(slice(a, a.samples.size() - 5, 20).samples.size(), 5u);
  EXPECT_EQ(slice(a, a.samples.size() + 5, 20).samples.size(), 0u);
}
