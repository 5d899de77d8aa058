#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spectttra/model.hpp"

namespace spectttra {

/// Closed-form FLOP model; one multiply-accumulate counts as 2 FLOPs.
struct FlopCounts {
  std::int64_t tokenizer = 0;
  std::int64_t encoder = 0;
  std::int64_t attention = 0;  // score and mix products only, part of encoder
  std::int64_t head = 0;
  std::int64_t total() const { return tokenizer + encoder + head; }
};

/// Per layer: projections 8nD^2, attention 4n^2 D, MLP 4nDH.
FlopCounts encoder_flops(const EncoderConfig& encoder, std::int64_t n_tokens);

/// Encoder terms plus tokenizer and head, with n_tokens taken from the tokenizer calculators.
FlopCounts analytic_flops(const Architecture& arch);

/// Scalars materialized at block boundaries in one forward pass:
/// tokens nD; per layer qkv 3nD, attention output nD, attention residual nD,
/// MLP hidden nH, block output nD; pooled D; logit 1. Attention probabilities
/// are not counted, so the total is linear in n.
std::int64_t count_activations(const Architecture& arch);

struct TimingProtocol {
  int warmup_runs = 5;
  int timed_runs = 100;
  int batch_size = 1;
};

struct SpeedResult {
  double input_seconds = 0.0;
  double mean_seconds = 0.0;  // per forward
  double audio_per_second = 0.0;
  int timed_runs = 0;  // after any increase for timer resolution
  double timer_resolution = 0.0;
  std::vector<std::string> warnings;
};

/// Single-threaded forward timing on a fixed random input of arch.n_mels x arch.frames.
SpeedResult measure_speed(const ModelParams<float>& params, const Architecture& arch, double input_seconds,
                          const TimingProtocol& protocol = {});

/// Smallest observable steady_clock increment, in seconds.
double timer_resolution();

std::string machine_descriptor();

struct ProfileReport {
  std::string model;  // e.g. "spectttra-gamma", "vit-p16"
  int frames = 0;
  double input_seconds = 0.0;
  std::int64_t n_tokens = 0;
  std::int64_t flops_total = 0;
  std::int64_t flops_attention = 0;
  std::int64_t params = 0;
  std::int64_t activations = 0;
  int memory_batch_size = 14;
  std::int64_t peak_bytes_estimate = 0;  // activations * sizeof(float) * memory_batch_size
  bool timed = false;
  double audio_per_second = 0.0;
  TimingProtocol protocol;
  std::string machine;
};

/// Analytic part of the report; timing fields stay empty.
ProfileReport profile(const Architecture& arch, const SpectrogramConfig& spectrogram);

std::string profile_csv_header();
std::string profile_csv_row(const ProfileReport& r);
std::string profile_text(const ProfileReport& r);

}  // namespace spectttra
