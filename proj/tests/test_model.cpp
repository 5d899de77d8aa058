#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spectttra/model.hpp"

using namespace spectttra;

namespace {

Architecture tiny(Variant v = Variant::gamma, int layers = 2) {
  Architecture a;
  a.n_mels = 16;
  a.frames = 24;
  a.encoder.embed_dim = 16;
  a.encoder.n_heads = 2;
  a.encoder.n_layers = layers;
  a.tokenizer.clip = ClipConfig::from_variant(v);
  return a;
}

Matrix<double> random_spec(const Architecture& a, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return Matrix<double>::NullaryExpr(a.n_mels, a.frames, [&] { return normal(rng); });
}

}  // namespace

TEST(ParamCount, AnalyticMatchesInstance) {
  Rng rng(1);
  for (auto v : {Variant::alpha, Variant::beta, Variant::gamma}) {
    for (int layers : {0, 1, 3}) {
      auto a = tiny(v, layers);
      EXPECT_EQ(count_params(a), count_params(init_params<double>(a, rng))) << to_string(v) << " " << layers;
      a.tokenizer.clip.spectral_enabled = false;
      EXPECT_EQ(count_params(a), count_params(init_params<double>(a, rng)));
    }
  }
  auto vit = tiny();
  vit.tokenizer.family = TokenizerFamily::vit;
  vit.tokenizer.patch.p = 8;
  EXPECT_EQ(count_params(vit), count_params(init_params<double>(vit, rng)));
}

TEST(ParamCount, HeadAloneAndZeroLayers) {
  Architecture a;
  a.encoder.n_layers = 0;
  a.frames = 128;
  const auto tok = count_params(a) - 2 * 384 - 385;
  // temporal: conv 384*128*7 + pos 18*384 + norm; spectral: conv 384*128*5 + pos 25*384 + norm
  EXPECT_EQ(tok, 384LL * 128 * 7 + 18 * 384 + 768 + 384LL * 128 * 5 + 25 * 384 + 768);
  EXPECT_EQ(EncoderConfig{}.mlp_hidden(), 1025);
}

TEST(ParamCount, DefaultLongConfigInPublishedBracket) {
  Architecture a;
  a.frames = 3744;
  const double millions = count_params(a) / 1e6;
  EXPECT_GE(millions, 17.0 * 0.7);
  EXPECT_LE(millions, 24.0 * 1.3);
}

TEST(Forward, ZeroWeightsGiveHalfProbability) {
  const auto a = tiny();
  Rng rng(2);
  auto p = init_params<double>(a, rng);
  for (auto& t : p.tensors()) std::fill(t.data.begin(), t.data.end(), 0.0);
  const double logit = forward(random_spec(a, rng), p, a);
  EXPECT_EQ(logit, 0.0);
  EXPECT_EQ(sigmoid(logit), 0.5);
}

TEST(Forward, TokenPermutationInvariance) {
  const auto a = tiny();
  Rng rng(3);
  const auto p = init_params<double>(a, rng);
  const auto seq = embed_tokens(random_spec(a, rng), p, a);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(seq.size()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Matrix<double> permuted(seq.tokens.rows(), seq.tokens.cols());
  for (std::size_t i = 0; i < order.size(); ++i) permuted.row(static_cast<Eigen::Index>(i)) = seq.tokens.row(order[i]);
  EXPECT_NEAR(encode(seq.tokens, p, a), encode(permuted, p, a), 1e-6);
}

TEST(Forward, AttentionRowsAndLayerNormOverManySeeds) {
  const auto a = tiny();
  double worst_row = 0.0, worst_mu = 0.0, worst_var = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto p = init_params<double>(a, rng);
    ForwardCache<double> cache;
    forward(random_spec(a, rng), p, a, &cache);
    for (const auto& b : cache.blocks) {
      for (const auto& att : b.attention) {
        worst_row = std::max(worst_row, (att.rowwise().sum().array() - 1.0).abs().maxCoeff());
        EXPECT_GE(att.minCoeff(), 0.0);
      }
      for (const auto* hat : {&b.norm1_hat, &b.norm2_hat}) {
        for (Eigen::Index i = 0; i < hat->rows(); ++i) {
          const double mu = hat->row(i).mean();
          worst_mu = std::max(worst_mu, std::abs(mu));
          worst_var = std::max(worst_var, std::abs((hat->row(i).array() - mu).square().mean() - 1.0));
        }
      }
    }
  }
  EXPECT_LT(worst_row, 1e-6);
  EXPECT_LT(worst_mu, 1e-5);
  EXPECT_LT(worst_var, 1e-3);
}

TEST(Forward, PooledIsExactMeanOfFinalTokens) {
  const auto a = tiny();
  Rng rng(4);
  const auto p = init_params<double>(a, rng);
  ForwardCache<double> cache;
  const double logit = forward(random_spec(a, rng), p, a, &cache);
  const RowVector<double> mean = cache.final_out.colwise().mean();
  EXPECT_LT((cache.pooled - mean).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(logit, cache.pooled.dot(p.head_weight) + p.head_bias(0), 1e-15);
}

TEST(Forward, DeterministicAndBoundedAtInit) {
  const auto a = tiny();
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const auto p = init_params<double>(a, rng);
    const auto s = random_spec(a, rng);
    const double x = forward(s, p, a);
    ASSERT_EQ(x, forward(s, p, a));
    ASSERT_LT(std::abs(x), 50.0);
  }
}

TEST(Forward, NonFiniteInputIsReportedWithLocation) {
  const auto a = tiny();
  Rng rng(5);
  const auto p = init_params<double>(a, rng);
  auto s = random_spec(a, rng);
  s(3, 4) = std::numeric_limits<double>::quiet_NaN();
  try {
    forward(s, p, a);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_FALSE(e.where().empty());
  }
}

TEST(Forward, ShapeMismatchIsRejected) {
  const auto a = tiny();
  Rng rng(6);
  const auto p = init_params<double>(a, rng);
  EXPECT_THROW(forward(Matrix<double>(Matrix<double>::Zero(16, 25)), p, a), std::invalid_argument);
}

TEST(Forward, FloatAndDoubleAgree) {
  const auto a = tiny();
  Rng rng(7);
  const auto p = init_params<double>(a, rng);
  const auto s = random_spec(a, rng);
  const auto pf = cast_params<float>(p);
  const float xf = forward(Matrix<float>(s.cast<float>()), pf, a);
  EXPECT_NEAR(static_cast<double>(xf), forward(s, p, a), 1e-4);
}

TEST(Tensors, NamesAreUniqueAndStable) {
  const auto a = tiny();
  Rng rng(8);
  auto p = init_params<double>(a, rng);
  const auto views = p.tensors();
  std::vector<std::string> names;
  for (const auto& v : views) names.push_back(v.name);
  auto sorted = names;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  std::int64_t total = 0;
  for (const auto& v : views) total += static_cast<std::int64_t>(v.data.size());
  EXPECT_EQ(total, count_params(a));
  Rng rng2(9);
  auto q = init_params<double>(a, rng2);
  std::vector<std::string> again;
  for (const auto& v : q.tensors()) again.push_back(v.name);
  EXPECT_EQ(names, again);
}

TEST(Config, RejectsIndivisibleHeads) {
  auto a = tiny();
  a.encoder.n_heads = 3;
  EXPECT_THROW(a.validate(), std::invalid_argument);
  a.encoder.n_heads = 2;
  a.encoder.mlp_ratio = 0.0;
  EXPECT_THROW(a.validate(), std::invalid_argument);
}
