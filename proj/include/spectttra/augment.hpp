#pragma once

#include <optional>
#include <vector>

#include "spectttra/tensor.hpp"

namespace spectttra {

struct AugmentConfig {
  double mixup_alpha = 2.5;
  double mixup_prob = 0.5;
  int n_time_masks = 2;
  int time_mask_size = 8;
  int n_freq_masks = 1;
  int freq_mask_size = 8;
  double mask_prob = 0.5;

  void validate() const;
};

struct MixResult {
  Matrix<double> spec;
  double label = 0.0;
  double lambda = 1.0;  // 1 when the mix was skipped
};

/// lambda * a + (1 - lambda) * b, with the labels mixed the same way.
MixResult mix(const Matrix<double>& a, const Matrix<double>& b, double ya, double yb, double lambda);

/// With probability mixup_prob draws lambda ~ Beta(alpha, alpha) and mixes;
/// otherwise returns (a, ya) unchanged.
MixResult mixup(const Matrix<double>& a, const Matrix<double>& b, double ya, double yb, const AugmentConfig& cfg,
                Rng& rng);

/// Beta(alpha, alpha) sample via two Gamma draws.
double sample_beta(double alpha, double beta, Rng& rng);

struct MaskBlock {
  enum class Axis { time, freq } axis;
  int start;
  int size;
};

/// Draws the mask layout for an F x T spectrogram: each configured mask is
/// kept with probability mask_prob and placed at a uniform offset.
std::vector<MaskBlock> draw_masks(int bins, int frames, const AugmentConfig& cfg, Rng& rng);

void apply_masks(Matrix<double>& spec, const std::vector<MaskBlock>& masks);

/// Zeroes fixed-width time and frequency blocks (masks may overlap).
Matrix<double> spec_augment(const Matrix<double>& spec, const AugmentConfig& cfg, Rng& rng);

}  // namespace spectttra
