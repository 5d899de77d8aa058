#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "spectttra/model.hpp"

using namespace spectttra;

namespace {

Architecture arch_for(int bins, int frames, ClipConfig clip, int dim = 16) {
  Architecture a;
  a.n_mels = bins;
  a.frames = frames;
  a.tokenizer.clip = clip;
  a.encoder.embed_dim = dim;
  a.encoder.n_heads = 2;
  a.encoder.n_layers = 1;
  return a;
}

Matrix<double> random_spec(int bins, int frames, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return Matrix<double>::NullaryExpr(bins, frames, [&] { return normal(rng); });
}

}  // namespace

TEST(TokenCount, VitSquarePatches) {
  EXPECT_EQ(vit_token_count(128, 128, 16), 64);
  EXPECT_EQ(vit_token_count(128, 3744, 16), 1872);
  EXPECT_EQ(vit_token_count(128, 15, 16), 0);
  EXPECT_THROW(vit_token_count(128, 128, 0), std::invalid_argument);
}

TEST(TokenCount, SpecTTTraVariants) {
  const auto g = ClipConfig::from_variant(Variant::gamma);
  EXPECT_EQ(spectttra_token_count(128, 128, g).total(), 43);
  const auto long_g = spectttra_token_count(128, 3744, g);
  EXPECT_EQ(long_g.temporal, 534);
  EXPECT_EQ(long_g.spectral, 25);
  EXPECT_EQ(long_g.total(), 559);
  EXPECT_EQ(spectttra_token_count(128, 128, ClipConfig::from_variant(Variant::alpha)).total(), 170);
  EXPECT_EQ(spectttra_token_count(128, 128, ClipConfig::from_variant(Variant::beta)).total(), 25 + 42);
  EXPECT_EQ(spectttra_token_count(128, 747, g).total(), 131);
}

TEST(TokenCount, LongContextReductionFactor) {
  const double ratio = 1872.0 / static_cast<double>(spectttra_token_count(128, 3744, ClipConfig{}).total());
  EXPECT_NEAR(ratio, 3.4, 3.4 * 0.03);
}

TEST(TokenCount, AblationZeroesOneBranch) {
  auto c = ClipConfig::from_variant(Variant::gamma);
  c.spectral_enabled = false;
  EXPECT_EQ(spectttra_token_count(128, 128, c).total(), 18);
  c.spectral_enabled = true;
  c.temporal_enabled = false;
  EXPECT_EQ(spectttra_token_count(128, 128, c).total(), 25);
  c.spectral_enabled = false;
  EXPECT_THROW(spectttra_token_count(128, 128, c), std::invalid_argument);
}

TEST(ClipConfig, RejectsNonPositiveSizes) {
  ClipConfig c;
  c.t = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.t = 7;
  c.f = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.spectral_enabled = false;
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(parse_variant("delta"), std::invalid_argument);
}

TEST(Clips, TemporalLayoutIsChannelMajor) {
  Matrix<double> s(3, 7);
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < 7; ++t) s(c, t) = 10 * c + t;
  const auto clips = temporal_clips(s, 3);
  ASSERT_EQ(clips.rows(), 2);
  ASSERT_EQ(clips.cols(), 9);
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 3; ++k) EXPECT_EQ(clips(i, c * 3 + k), s(c, i * 3 + k));
}

TEST(Clips, SpectralLayoutTransposes) {
  Matrix<double> s(5, 4);
  for (int c = 0; c < 5; ++c)
    for (int t = 0; t < 4; ++t) s(c, t) = 10 * c + t;
  const auto clips = spectral_clips(s, 2);
  ASSERT_EQ(clips.rows(), 2);
  ASSERT_EQ(clips.cols(), 8);
  for (int j = 0; j < 2; ++j)
    for (int tau = 0; tau < 4; ++tau)
      for (int k = 0; k < 2; ++k) EXPECT_EQ(clips(j, tau * 2 + k), s(j * 2 + k, tau));
}

TEST(Clips, PatchOrderIsRowMajorOverFrequencyThenTime) {
  Matrix<double> s(4, 6);
  for (int c = 0; c < 4; ++c)
    for (int t = 0; t < 6; ++t) s(c, t) = 10 * c + t;
  const auto p = extract_patches(s, 2);
  ASSERT_EQ(p.rows(), 6);
  // Patch 1 is frequency block 0, time block 1.
  EXPECT_EQ(p(1, 0), s(0, 2));
  EXPECT_EQ(p(1, 3), s(1, 3));
  // Patch 3 is frequency block 1, time block 0.
  EXPECT_EQ(p(3, 0), s(2, 0));
}

TEST(Tokenize, ReceptiveFieldsAreLocal) {
  // Perturbing one cell changes exactly one temporal token and one spectral token.
  Rng rng(1);
  const auto arch = arch_for(20, 28, ClipConfig::from_variant(Variant::gamma));
  const auto params = init_params<double>(arch, rng);
  auto spec = random_spec(20, 28, rng);
  const auto base = embed_tokens(spec, params, arch);
  const int row = 11, col = 15;
  spec(row, col) += 1.0;
  const auto moved = embed_tokens(spec, params, arch);
  ASSERT_EQ(base.n_temporal, 4);
  ASSERT_EQ(base.n_spectral, 4);
  std::set<Eigen::Index> changed;
  for (Eigen::Index i = 0; i < base.tokens.rows(); ++i) {
    if ((base.tokens.row(i) - moved.tokens.row(i)).cwiseAbs().maxCoeff() > 0.0) changed.insert(i);
  }
  const std::set<Eigen::Index> expected{col / 7, base.n_temporal + row / 5};
  EXPECT_EQ(changed, expected);
}

TEST(Tokenize, TrailingRemainderIsDropped) {
  // 30 frames hold four 7-frame clips and 17 bins hold three 5-bin clips; the
  // leftovers feed only the other branch, whose clips span the whole axis.
  Rng rng(2);
  const auto arch = arch_for(17, 30, ClipConfig::from_variant(Variant::gamma));
  const auto params = init_params<double>(arch, rng);
  const auto spec = random_spec(17, 30, rng);
  const auto base = embed_tokens(spec, params, arch);
  ASSERT_EQ(base.n_temporal, 4);
  ASSERT_EQ(base.n_spectral, 3);

  auto late = spec;
  late.rightCols(2).setConstant(5.0);
  const auto a = embed_tokens(late, params, arch);
  EXPECT_EQ(a.tokens.topRows(4), base.tokens.topRows(4));
  EXPECT_NE(a.tokens.bottomRows(3), base.tokens.bottomRows(3));

  auto high = spec;
  high.bottomRows(2).setConstant(-5.0);
  const auto b = embed_tokens(high, params, arch);
  EXPECT_EQ(b.tokens.bottomRows(3), base.tokens.bottomRows(3));
  EXPECT_NE(b.tokens.topRows(4), base.tokens.topRows(4));
}

TEST(Tokenize, LayerNormStatisticsPerToken) {
  Rng rng(3);
  const auto arch = arch_for(64, 96, ClipConfig::from_variant(Variant::beta), 32);
  const auto params = init_params<double>(arch, rng);
  const auto spec = random_spec(64, 96, rng);
  TokenizerCache<double> cache;
  tokenize(spec, params.tokenizer, arch.tokenizer.clip, &cache);
  for (const auto* branch : {&*cache.temporal, &*cache.spectral}) {
    for (Eigen::Index i = 0; i < branch->normalized.rows(); ++i) {
      const auto r = branch->normalized.row(i);
      const double mu = r.mean();
      const double var = (r.array() - mu).square().mean();
      EXPECT_LT(std::abs(mu), 1e-5);
      EXPECT_NEAR(var, 1.0, 1e-3);
    }
  }
}

TEST(Tokenize, PositionalEmbeddingInitScale) {
  Rng rng(4);
  const auto arch = arch_for(128, 3744, ClipConfig::from_variant(Variant::gamma), 64);
  const auto params = init_params<double>(arch, rng);
  const auto& pos = params.tokenizer.temporal->pos;
  ASSERT_EQ(pos.rows(), 534);
  const double mu = pos.mean();
  const double sd = std::sqrt((pos.array() - mu).square().mean());
  EXPECT_NEAR(mu, 0.0, 0.002);
  EXPECT_NEAR(sd, 0.02, 0.001);
}

TEST(Tokenize, ShapeMismatchIsRejected) {
  Rng rng(5);
  const auto arch = arch_for(16, 28, ClipConfig::from_variant(Variant::gamma));
  const auto params = init_params<double>(arch, rng);
  const auto wrong = random_spec(16, 35, rng);
  EXPECT_THROW(tokenize(wrong, params.tokenizer, arch.tokenizer.clip), std::invalid_argument);
  auto temporal_only = arch.tokenizer.clip;
  temporal_only.spectral_enabled = false;
  EXPECT_THROW(tokenize(random_spec(16, 28, rng), params.tokenizer, temporal_only), std::invalid_argument);
}

TEST(Tokenize, VitTokensAddPositionAfterBias) {
  Rng rng(6);
  Architecture arch = arch_for(32, 48, ClipConfig{});
  arch.tokenizer.family = TokenizerFamily::vit;
  arch.tokenizer.patch.p = 16;
  const auto params = init_params<double>(arch, rng);
  const auto spec = random_spec(32, 48, rng);
  const auto seq = embed_tokens(spec, params, arch);
  ASSERT_EQ(seq.size(), 6);
  EXPECT_EQ(seq.n_spectral, 0);
  const auto patches = extract_patches(spec, 16);
  for (Eigen::Index i = 0; i < 6; ++i) {
    const RowVector<double> want = patches.row(i) * params.patch.weight.transpose() + params.patch.bias + params.patch.pos.row(i);
    EXPECT_LT((seq.tokens.row(i) - want).cwiseAbs().maxCoeff(), 1e-12);
  }
}
