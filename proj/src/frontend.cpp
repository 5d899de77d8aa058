#include "spectttra/frontend.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace spectttra {
namespace {

// FFTW's planner is not reentrant; execution of an existing plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<std::size_t>(n)));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n / 2 + 1)));
    if (in_ == nullptr || out_ == nullptr) {
      fftw_free(in_);
      fftw_free(out_);
      throw std::bad_alloc();
    }
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  double power(int k) const { return out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1]; }
  int size() const { return n_; }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_points(const SpectrogramConfig& config) {
  const double lo = hz_to_mel(config.fmin);
  const double hi = hz_to_mel(config.effective_fmax());
  std::vector<double> hz(static_cast<std::size_t>(config.n_mels) + 2);
  for (std::size_t i = 0; i < hz.size(); ++i) {
    hz[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(hz.size() - 1));
  }
  return hz;
}

}  // namespace

void SpectrogramConfig::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
  if (n_fft < 2) throw std::invalid_argument("n_fft must be >= 2");
  if (win_length < 1 || win_length > n_fft) throw std::invalid_argument("win_length must be in [1, n_fft]");
  if (hop_length < 1) throw std::invalid_argument("hop_length must be >= 1");
  if (n_mels < 1) throw std::invalid_argument("n_mels must be >= 1");
  if (target_frames < 1) throw std::invalid_argument("target_frames must be >= 1");
  if (fmin < 0.0) throw std::invalid_argument("fmin must be non-negative");
  if (effective_fmax() > sample_rate / 2.0) throw std::invalid_argument("fmax exceeds Nyquist");
  if (effective_fmax() <= fmin) throw std::invalid_argument("fmax must exceed fmin");
}

int SpectrogramConfig::frames_for_seconds(double seconds) const {
  const auto n = static_cast<long long>(std::llround(seconds * sample_rate));
  if (n <= n_fft) return 1;
  return static_cast<int>(1 + (n - n_fft) / hop_length);
}

std::vector<double> mel_center_frequencies(const SpectrogramConfig& config) {
  config.validate();
  const auto pts = mel_points(config);
  return {pts.begin() + 1, pts.end() - 1};
}

Matrix<double> mel_filterbank(const SpectrogramConfig& config) {
  config.validate();
  const int n_bins = config.n_fft / 2 + 1;
  const auto pts = mel_points(config);
  Matrix<double> fb = Matrix<double>::Zero(config.n_mels, n_bins);
  for (int m = 0; m < config.n_mels; ++m) {
    const double left = pts[static_cast<std::size_t>(m)];
    const double center = pts[static_cast<std::size_t>(m) + 1];
    const double right = pts[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double hz = static_cast<double>(k) * config.sample_rate / config.n_fft;
      const double up = (hz - left) / (center - left);
      const double down = (right - hz) / (right - center);
      fb(m, k) = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

Matrix<double> log_mel(const AudioBuffer& audio, const SpectrogramConfig& config) {
  config.validate();
  if (audio.samples.empty()) throw std::invalid_argument("log_mel: zero-length audio");
  if (audio.sample_rate != config.sample_rate) {
    throw std::invalid_argument("log_mel: audio sample rate " + std::to_string(audio.sample_rate) +
                                " does not match config " + std::to_string(config.sample_rate));
  }

  const int n_fft = config.n_fft;
  const int n_bins = n_fft / 2 + 1;
  const auto n = static_cast<long long>(audio.samples.size());
  const int frames = n <= n_fft ? 1 : static_cast<int>(1 + (n - n_fft) / config.hop_length);

  // Periodic Hann window, zero-padded and centered inside n_fft.
  std::vector<double> window(static_cast<std::size_t>(n_fft), 0.0);
  const int offset = (n_fft - config.win_length) / 2;
  for (int i = 0; i < config.win_length; ++i) {
    window[static_cast<std::size_t>(offset + i)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / config.win_length);
  }

  const Matrix<double> fb = mel_filterbank(config);
  Matrix<double> power(frames, n_bins);
  RealFft fft(n_fft);
  for (int fr = 0; fr < frames; ++fr) {
    const long long start = static_cast<long long>(fr) * config.hop_length;
    double* in = fft.input();
    for (int i = 0; i < n_fft; ++i) {
      const long long idx = start + i;
      in[i] = idx < n ? audio.samples[static_cast<std::size_t>(idx)] * window[static_cast<std::size_t>(i)] : 0.0;
    }
    fft.execute();
    for (int k = 0; k < n_bins; ++k) power(fr, k) = fft.power(k);
  }

  Matrix<double> mel = fb * power.transpose();
  return (mel.array() + kLogFloor).log().matrix();
}

void standardize(Matrix<double>& values) {
  if (values.size() == 0) return;
  const double mean = values.mean();
  const double var = (values.array() - mean).square().mean();
  const double std = std::max(std::sqrt(var), kStdFloor);
  values = ((values.array() - mean) / std).matrix();
  // A constant input leaves exact zeros rather than rounding residue.
  if (std == kStdFloor) values.setZero();
}

Matrix<double> fit_frames(const Matrix<double>& values, int target_frames, FrameMode mode, Rng* rng) {
  if (target_frames < 1) throw std::invalid_argument("fit_frames: target_frames must be >= 1");
  if (mode == FrameMode::train && rng == nullptr) {
    throw std::invalid_argument("fit_frames: train mode requires an rng");
  }
  const int frames = static_cast<int>(values.cols());
  if (frames == target_frames) return values;

  Matrix<double> out = Matrix<double>::Zero(values.rows(), target_frames);
  if (frames < target_frames) {
    int left = 0;
    if (mode == FrameMode::train) {
      left = std::uniform_int_distribution<int>(0, target_frames - frames)(*rng);
    }
    out.middleCols(left, frames) = values;
  } else {
    int start = (frames - target_frames) / 2;
    if (mode == FrameMode::train) {
      start = std::uniform_int_distribution<int>(0, frames - target_frames)(*rng);
    }
    out = values.middleCols(start, target_frames);
  }
  return out;
}

MelSpectrogram compute_mel(const AudioBuffer& audio, const SpectrogramConfig& config, FrameMode mode,
                           Rng& rng, std::string source_id) {
  Matrix<double> values = log_mel(audio, config);
  standardize(values);
  MelSpectrogram out;
  out.values = fit_frames(values, config.target_frames, mode, &rng);
  out.config = config;
  out.source_id = std::move(source_id);
  return out;
}

MelSpectrogram compute_mel(const AudioBuffer& audio, const SpectrogramConfig& config, std::string source_id) {
  Rng unused(0);
  return compute_mel(audio, config, FrameMode::eval, unused, std::move(source_id));
}

MelSpectrogram compute_mel(const AudioBuffer& audio, const SpectrogramConfig& config, FrameMode mode,
                           std::uint64_t seed, std::string source_id) {
  Rng rng(seed);
  return compute_mel(audio, config, mode, rng, std::move(source_id));
}

}  // namespace spectttra
