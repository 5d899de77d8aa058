#include "spectttra/augment.hpp"

#include <stdexcept>

namespace spectttra {

void AugmentConfig::validate() const {
  if (!(mixup_alpha > 0.0)) throw std::invalid_argument("mixup_alpha must be positive");
  if (mixup_prob < 0.0 || mixup_prob > 1.0) throw std::invalid_argument("mixup_prob must be in [0, 1]");
  if (mask_prob < 0.0 || mask_prob > 1.0) throw std::invalid_argument("mask_prob must be in [0, 1]");
  if (n_time_masks < 0 || n_freq_masks < 0) throw std::invalid_argument("mask counts must be non-negative");
  if (time_mask_size < 0 || freq_mask_size < 0) throw std::invalid_argument("mask sizes must be non-negative");
}

MixResult mix(const Matrix<double>& a, const Matrix<double>& b, double ya, double yb, double lambda) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("mixup: shape mismatch");
  MixResult out;
  out.lambda = lambda;
  if (lambda == 1.0) {
    out.spec = a;
    out.label = ya;
    return out;
  }
  out.spec = lambda * a + (1.0 - lambda) * b;
  out.label = ya == yb ? ya : lambda * ya + (1.0 - lambda) * yb;
  return out;
}

double sample_beta(double alpha, double beta, Rng& rng) {
  std::gamma_distribution<double> ga(alpha, 1.0);
  std::gamma_distribution<double> gb(beta, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

MixResult mixup(const Matrix<double>& a, const Matrix<double>& b, double ya, double yb, const AugmentConfig& cfg,
                Rng& rng) {
  cfg.validate();
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("mixup: shape mismatch");
  std::bernoulli_distribution apply(cfg.mixup_prob);
  if (!apply(rng)) return mix(a, b, ya, yb, 1.0);
  return mix(a, b, ya, yb, sample_beta(cfg.mixup_alpha, cfg.mixup_alpha, rng));
}

std::vector<MaskBlock> draw_masks(int bins, int frames, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.n_time_masks > 0 && cfg.time_mask_size > frames) {
    throw std::invalid_argument("spec_augment: time mask wider than the frame axis");
  }
  if (cfg.n_freq_masks > 0 && cfg.freq_mask_size > bins) {
    throw std::invalid_argument("spec_augment: frequency mask taller than the mel axis");
  }
  std::vector<MaskBlock> masks;
  std::bernoulli_distribution apply(cfg.mask_prob);
  for (int i = 0; i < cfg.n_time_masks; ++i) {
    if (!apply(rng)) continue;
    const int start = std::uniform_int_distribution<int>(0, frames - cfg.time_mask_size)(rng);
    masks.push_back({MaskBlock::Axis::time, start, cfg.time_mask_size});
  }
  for (int i = 0; i < cfg.n_freq_masks; ++i) {
    if (!apply(rng)) continue;
    const int start = std::uniform_int_distribution<int>(0, bins - cfg.freq_mask_size)(rng);
    masks.push_back({MaskBlock::Axis::freq, start, cfg.freq_mask_size});
  }
  return masks;
}

void apply_masks(Matrix<double>& spec, const std::vector<MaskBlock>& masks) {
  for (const auto& m : masks) {
    if (m.axis == MaskBlock::Axis::time) {
      if (m.start < 0 || m.start + m.size > spec.cols()) throw std::invalid_argument("time mask out of range");
      spec.middleCols(m.start, m.size).setZero();
    } else {
      if (m.start < 0 || m.start + m.size > spec.rows()) throw std::invalid_argument("frequency mask out of range");
      spec.middleRows(m.start, m.size).setZero();
    }
  }
}

Matrix<double> spec_augment(const Matrix<double>& spec, const AugmentConfig& cfg, Rng& rng) {
  Matrix<double> out = spec;
  apply_masks(out, draw_masks(static_cast<int>(spec.rows()), static_cast<int>(spec.cols()), cfg, rng));
  return out;
}

}  // namespace spectttra
