#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "spectttra/frontend.hpp"

using namespace spectttra;

namespace {

AudioBuffer noise(double seconds, int sr, std::uint64_t seed, double amp = 0.1) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, amp);
  AudioBuffer a;
  a.sample_rate = sr;
  a.samples.resize(static_cast<std::size_t>(seconds * sr));
  for (double& s : a.samples) s = normal(rng);
  return a;
}

double mean(const Matrix<double>& m) { return m.mean(); }

double variance(const Matrix<double>& m) {
  const double mu = m.mean();
  return (m.array() - mu).square().mean();
}

}  // namespace

TEST(FrameCount, MatchesUncenteredStft) {
  SpectrogramConfig c;
  EXPECT_EQ(c.frames_for_seconds(5.0), 153);
  EXPECT_EQ(c.frames_for_seconds(120.0), 3747);
  EXPECT_EQ(c.frames_for_seconds(24.0), 747);
  EXPECT_EQ(c.frames_for_seconds(2.0), 59);
  // Shorter than one window still yields one (zero-padded) frame.
  EXPECT_EQ(c.frames_for_seconds(0.01), 1);
}

TEST(LogMel, ShapeFollowsFrameCount) {
  SpectrogramConfig c;
  const auto a = noise(5.0, c.sample_rate, 1);
  const auto m = log_mel(a, c);
  EXPECT_EQ(m.rows(), 128);
  EXPECT_EQ(m.cols(), 153);
  EXPECT_TRUE(m.allFinite());
}

TEST(LogMel, SilenceHitsTheLogFloor) {
  SpectrogramConfig c;
  AudioBuffer a;
  a.sample_rate = c.sample_rate;
  a.samples.assign(4096, 0.0);
  const auto m = log_mel(a, c);
  EXPECT_NEAR(m.maxCoeff(), std::log(kLogFloor), 1e-12);
  EXPECT_NEAR(m.minCoeff(), std::log(kLogFloor), 1e-12);
}

TEST(LogMel, ToneLandsInTheMatchingMelBand) {
  SpectrogramConfig c;
  AudioBuffer a;
  a.sample_rate = c.sample_rate;
  for (int i = 0; i < c.sample_rate; ++i) a.samples.push_back(0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 * i / c.sample_rate));
  const auto m = log_mel(a, c);
  const auto centers = mel_center_frequencies(c);
  Eigen::Index best = 0;
  m.col(m.cols() / 2).maxCoeff(&best);
  EXPECT_NEAR(centers[static_cast<std::size_t>(best)], 1000.0, 60.0);
}

TEST(Filterbank, TrianglesPeakAtOne) {
  SpectrogramConfig c;
  c.n_mels = 40;
  const auto fb = mel_filterbank(c);
  EXPECT_EQ(fb.rows(), 40);
  EXPECT_EQ(fb.cols(), c.n_fft / 2 + 1);
  EXPECT_GE(fb.minCoeff(), 0.0);
  EXPECT_LE(fb.maxCoeff(), 1.0 + 1e-12);
  for (Eigen::Index r = 0; r < fb.rows(); ++r) EXPECT_GT(fb.row(r).maxCoeff(), 0.5) << "filter " << r;
}

TEST(Standardize, ZeroMeanUnitVariance) {
  SpectrogramConfig c;
  auto m = log_mel(noise(3.0, c.sample_rate, 2), c);
  standardize(m);
  EXPECT_NEAR(mean(m), 0.0, 1e-10);
  EXPECT_NEAR(variance(m), 1.0, 1e-10);
}

TEST(Standardize, ConstantInputStaysFinite) {
  Matrix<double> m = Matrix<double>::Constant(4, 5, 3.0);
  standardize(m);
  EXPECT_TRUE(m.allFinite());
  EXPECT_EQ(m.maxCoeff(), 0.0);
}

TEST(ComputeMel, InvariantToAmplitudeScaling) {
  // A gain k shifts the log-mel by ~2 log k; standardization removes it.
  SpectrogramConfig c;
  const auto a = noise(3.0, c.sample_rate, 3, 0.2);
  auto b = a;
  for (double& s : b.samples) s *= 4.0;
  const auto ma = compute_mel(a, c);
  const auto mb = compute_mel(b, c);
  EXPECT_LT((ma.values - mb.values).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(FitFrames, EvalPadsRightAndCropsCentered) {
  Matrix<double> m(2, 5);
  m << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  const auto padded = fit_frames(m, 8, FrameMode::eval);
  ASSERT_EQ(padded.cols(), 8);
  EXPECT_EQ(padded.leftCols(5), m);
  EXPECT_EQ(padded.rightCols(3).cwiseAbs().maxCoeff(), 0.0);

  const auto cropped = fit_frames(m, 2, FrameMode::eval);
  ASSERT_EQ(cropped.cols(), 2);
  // floor((5 - 2) / 2) = 1
  EXPECT_EQ(cropped, m.middleCols(1, 2));
  EXPECT_EQ(fit_frames(m, 5, FrameMode::eval), m);
}

TEST(FitFrames, TrainCropIsAContiguousWindow) {
  Matrix<double> m(1, 50);
  for (int i = 0; i < 50; ++i) m(0, i) = i;
  Rng rng(7);
  bool saw_nonzero_offset = false;
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = fit_frames(m, 10, FrameMode::train, &rng);
    ASSERT_EQ(c.cols(), 10);
    const double start = c(0, 0);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(c(0, i), start + i);
    saw_nonzero_offset |= start != 20.0;
  }
  EXPECT_TRUE(saw_nonzero_offset);
}

TEST(FitFrames, TrainPadKeepsContentInOrder) {
  Matrix<double> m(1, 3);
  m << 1, 2, 3;
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = fit_frames(m, 7, FrameMode::train, &rng);
    ASSERT_EQ(p.cols(), 7);
    int first = 0;
    while (p(0, first) == 0.0) ++first;
    ASSERT_LE(first, 4);
    EXPECT_EQ(p(0, first), 1.0);
    EXPECT_EQ(p(0, first + 1), 2.0);
    EXPECT_EQ(p(0, first + 2), 3.0);
    EXPECT_NEAR(p.sum(), 6.0, 0.0);
  }
}

TEST(Config, RejectsFmaxAboveNyquist) {
  SpectrogramConfig c;
  c.fmax = 9000.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.fmax = 8000.0;
  EXPECT_NO_THROW(c.validate());
  c.win_length = 4096;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ComputeMel, SeededTrainModeIsDeterministic) {
  SpectrogramConfig c;
  c.target_frames = 40;
  const auto a = noise(3.0, c.sample_rate, 4);
  const auto x = compute_mel(a, c, FrameMode::train, std::uint64_t{11});
  const auto y = compute_mel(a, c, FrameMode::train, std::uint64_t{11});
  EXPECT_EQ(x.values, y.values);
  EXPECT_EQ(x.frames(), 40);
}
