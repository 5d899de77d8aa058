#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "spectttra/audio.hpp"
#include "spectttra/tensor.hpp"

namespace spectttra {

struct SpectrogramConfig {
  int sample_rate = 16000;
  int n_fft = 2048;
  int win_length = 2048;
  int hop_length = 512;
  int n_mels = 128;
  int target_frames = 128;
  double fmin = 0.0;
  std::optional<double> fmax;  // defaults to Nyquist

  double effective_fmax() const { return fmax.value_or(sample_rate / 2.0); }
  void validate() const;

  /// Frame count of an uncentered STFT over `seconds` of audio.
  int frames_for_seconds(double seconds) const;
};

/// Log-mel spectrogram, n_mels rows by target_frames columns.
struct MelSpectrogram {
  Matrix<double> values;
  SpectrogramConfig config;
  std::string source_id;

  int bins() const { return static_cast<int>(values.rows()); }
  int frames() const { return static_cast<int>(values.cols()); }
};

enum class FrameMode { train, eval };

inline constexpr double kLogFloor = 1e-5;
inline constexpr double kStdFloor = 1e-8;

/// HTK-scale triangular filters, n_mels x (n_fft / 2 + 1), unnormalized.
Matrix<double> mel_filterbank(const SpectrogramConfig& config);

/// Center frequency (Hz) of each mel filter.
std::vector<double> mel_center_frequencies(const SpectrogramConfig& config);

/// Power STFT (Hann window, uncentered) projected on the mel filterbank,
/// followed by log(mel + 1e-5). Shape n_mels x frames, where
/// frames = 1 + (n - n_fft) / hop for n >= n_fft and 1 otherwise
/// (short input is zero-padded up to one window).
Matrix<double> log_mel(const AudioBuffer& audio, const SpectrogramConfig& config);

/// In-place per-instance standardization over all cells; std is clamped at 1e-8.
void standardize(Matrix<double>& values);

/// Pads with zeros or crops along the time axis to exactly `target_frames`.
/// Eval: right padding, centered crop at floor((frames - T) / 2).
/// Train: pad split and crop offset drawn uniformly from `rng`.
Matrix<double> fit_frames(const Matrix<double>& values, int target_frames, FrameMode mode,
                          Rng* rng = nullptr);

/// Full front end: log-mel, standardize, then fit to config.target_frames.
MelSpectrogram compute_mel(const AudioBuffer& audio, const SpectrogramConfig& config,
                           FrameMode mode, Rng& rng, std::string source_id = {});

/// Eval-mode convenience; deterministic.
MelSpectrogram compute_mel(const AudioBuffer& audio, const SpectrogramConfig& config,
                           std::string source_id = {});

MelSpectrogram compute_mel(const AudioBuffer& audio, const SpectrogramConfig& config,
                           FrameMode mode, std::uint64_t seed, std::string source_id = {});

}  // namespace spectttra
