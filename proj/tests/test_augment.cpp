#include <gtest/gtest.h>

#include <cmath>

#include "spectttra/augment.hpp"

using namespace spectttra;

namespace {

Matrix<double> nonzero_spec(int bins, int frames, Rng& rng) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  return Matrix<double>::NullaryExpr(bins, frames, [&] { return u(rng); });
}

bool masked(const std::vector<MaskBlock>& masks, int row, int col) {
  for (const auto& m : masks) {
    const int pos = m.axis == MaskBlock::Axis::time ? col : row;
    if (pos >= m.start && pos < m.start + m.size) return true;
  }
  return false;
}

}  // namespace

TEST(Beta, MomentsAtAlphaTwoPointFive) {
  Rng rng(1);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_beta(2.5, 2.5, rng);
    ASSERT_GT(x, 0.0);
    ASSERT_LT(x, 1.0);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.5, 0.01);
  // Beta(a, a) variance is 1 / (4 (2a + 1)) = 1/24.
  EXPECT_NEAR(var, 1.0 / 24.0, 0.002);
}

TEST(Mix, ConvexCombinationIsExact) {
  Rng rng(2);
  const auto a = nonzero_spec(4, 6, rng);
  const auto b = nonzero_spec(4, 6, rng);
  const auto r = mix(a, b, 1.0, 0.0, 0.3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_DOUBLE_EQ(r.spec(i, j), 0.3 * a(i, j) + 0.7 * b(i, j));
  EXPECT_EQ(r.label, 0.3);
  EXPECT_EQ(mix(a, b, 1.0, 1.0, 0.3).label, 1.0);
  EXPECT_EQ(mix(a, b, 0.0, 1.0, 1.0).spec, a);
  EXPECT_THROW(mix(a, Matrix<double>::Zero(4, 5), 0, 1, 0.5), std::invalid_argument);
}

TEST(Mixup, ProbabilityZeroAndOne) {
  Rng rng(3);
  const auto a = nonzero_spec(3, 3, rng);
  const auto b = nonzero_spec(3, 3, rng);
  AugmentConfig cfg;
  cfg.mixup_prob = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto r = mixup(a, b, 1.0, 0.0, cfg, rng);
    EXPECT_EQ(r.lambda, 1.0);
    EXPECT_EQ(r.spec, a);
  }
  cfg.mixup_prob = 1.0;
  int mixed = 0;
  for (int i = 0; i < 20; ++i) mixed += mixup(a, b, 1.0, 0.0, cfg, rng).lambda < 1.0;
  EXPECT_EQ(mixed, 20);
}

TEST(SpecAugment, ZeroesExactlyTheMaskGeometry) {
  AugmentConfig cfg;
  cfg.mask_prob = 1.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng data_rng(seed + 1000);
    const auto spec = nonzero_spec(32, 40, data_rng);
    Rng a(seed), b(seed);
    const auto masks = draw_masks(32, 40, cfg, a);
    ASSERT_EQ(masks.size(), 3u);
    const auto out = spec_augment(spec, cfg, b);
    for (int i = 0; i < 32; ++i) {
      for (int j = 0; j < 40; ++j) {
        if (masked(masks, i, j)) {
          ASSERT_EQ(out(i, j), 0.0);
        } else {
          ASSERT_EQ(out(i, j), spec(i, j));
        }
      }
    }
  }
}

TEST(SpecAugment, MaskSizesAndProbability) {
  AugmentConfig cfg;
  Rng rng(4);
  int kept = 0, drawn = 0;
  for (int i = 0; i < 2000; ++i) {
    for (const auto& m : draw_masks(128, 128, cfg, rng)) {
      EXPECT_EQ(m.size, 8);
      EXPECT_GE(m.start, 0);
      EXPECT_LE(m.start + m.size, 128);
      ++kept;
    }
    drawn += 3;
  }
  EXPECT_NEAR(static_cast<double>(kept) / drawn, 0.5, 0.03);
}

TEST(SpecAugment, RejectsOversizedMasks) {
  AugmentConfig cfg;
  Rng rng(5);
  EXPECT_THROW(draw_masks(128, 4, cfg, rng), std::invalid_argument);
  EXPECT_THROW(draw_masks(4, 128, cfg, rng), std::invalid_argument);
  cfg.mixup_prob = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  Matrix<double> m = Matrix<double>::Ones(4, 4);
  EXPECT_THROW(apply_masks(m, {{MaskBlock::Axis::time, 2, 3}}), std::invalid_argument);
}
