#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace spectttra {

/// Mono PCM signal with samples nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  void validate() const;
};

enum class WavEncoding { pcm16, pcm24, float32 };

/// Reads a RIFF/WAVE file. PCM16, PCM24 and IEEE float32 (including
/// WAVE_FORMAT_EXTENSIBLE wrappers of those) are accepted. Multi-channel
/// input is averaged down to mono.
AudioBuffer read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding = WavEncoding::pcm16);

/// Band-limited resampling with a Kaiser-windowed sinc kernel. Output length
/// is round(n * target_rate / source_rate). Equal rates return an exact copy.
AudioBuffer resample(const AudioBuffer& audio, int target_rate);

/// Returns the segment [start, start + length) clamped to the buffer.
AudioBuffer slice(const AudioBuffer& audio, std::size_t start, std::size_t length);

}  // namespace spectttra
