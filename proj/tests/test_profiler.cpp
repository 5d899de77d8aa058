#include <gtest/gtest.h>

#include <cmath>

#include "spectttra/profiler.hpp"

using namespace spectttra;

namespace {

Architecture long_arch(TokenizerFamily family, int frames = 3744) {
  Architecture a;
  a.frames = frames;
  a.tokenizer.family = family;
  return a;
}

Architecture small_arch(TokenizerFamily family, int frames) {
  Architecture a;
  a.frames = frames;
  a.tokenizer.family = family;
  a.encoder.embed_dim = 64;
  a.encoder.n_heads = 4;
  a.encoder.n_layers = 2;
  return a;
}

double seconds_per_forward(const Architecture& a) {
  Rng rng(1);
  const auto p = init_params<float>(a, rng);
  return measure_speed(p, a, 1.0, {1, 5, 1}).mean_seconds;
}

// Least-squares slope of log(time) against log(frames).
double growth_exponent(TokenizerFamily family) {
  const int frames[] = {512, 1024, 2048};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int t : frames) {
    const double x = std::log(t);
    const double y = std::log(seconds_per_forward(small_arch(family, t)));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
}

}  // namespace

TEST(Flops, AttentionQuadruplesWhenTokensDouble) {
  const EncoderConfig e;
  EXPECT_EQ(encoder_flops(e, 1000).attention * 4, encoder_flops(e, 2000).attention);
  EXPECT_EQ(encoder_flops(e, 559).attention, 12LL * 4 * 559 * 559 * 384);
  const auto f = encoder_flops(e, 100);
  EXPECT_EQ(f.encoder, 12LL * (8 * 100 * 384 * 384 + 4 * 100 * 384 * 1025) + f.attention);
}

TEST(Flops, LongConfigRatios) {
  const auto vit = analytic_flops(long_arch(TokenizerFamily::vit));
  const auto gamma = analytic_flops(long_arch(TokenizerFamily::spectttra));
  EXPECT_GT(static_cast<double>(vit.total()) / static_cast<double>(gamma.total()), 2.0);
  EXPECT_GT(static_cast<double>(vit.attention) / static_cast<double>(gamma.attention), 10.0);
}

TEST(Flops, ZeroLayersLeavesTokenizerAndHead) {
  auto a = long_arch(TokenizerFamily::spectttra, 128);
  a.encoder.n_layers = 0;
  const auto f = analytic_flops(a);
  EXPECT_EQ(f.encoder, 0);
  EXPECT_EQ(f.total(), f.tokenizer + f.head);
  EXPECT_EQ(f.tokenizer, 2LL * 18 * 384 * 128 * 7 + 2LL * 25 * 384 * 128 * 5);
  EXPECT_EQ(f.head, 768);
}

TEST(Flops, MonotoneInSize) {
  EncoderConfig e;
  const auto base = encoder_flops(e, 300).encoder;
  EXPECT_GT(encoder_flops(e, 301).encoder, base);
  e.embed_dim = 390;
  e.n_heads = 6;
  EXPECT_GT(encoder_flops(e, 300).encoder, base);
  e = EncoderConfig{};
  e.n_layers = 13;
  EXPECT_GT(encoder_flops(e, 300).encoder, base);
}

TEST(Flops, AttentionRatioGrowsWithLength) {
  double prev = 0.0;
  for (int frames : {128, 1024, 3744}) {
    const double r = static_cast<double>(analytic_flops(long_arch(TokenizerFamily::vit, frames)).attention) /
                     static_cast<double>(analytic_flops(long_arch(TokenizerFamily::spectttra, frames)).attention);
    EXPECT_GT(r, prev) << frames;
    prev = r;
  }
}

TEST(Activations, ZeroLayersAndLinearity) {
  auto a = long_arch(TokenizerFamily::spectttra, 128);
  a.encoder.n_layers = 0;
  EXPECT_EQ(count_activations(a), 43 * 384 + 384 + 1);

  // 112 and 224 frames give 16 and 32 temporal tokens with the spectral branch off.
  auto t = long_arch(TokenizerFamily::spectttra, 112);
  t.tokenizer.clip.spectral_enabled = false;
  const auto small = count_activations(t) - 385;
  t.frames = 224;
  EXPECT_EQ(count_activations(t) - 385, 2 * small);
}

TEST(Activations, LongRatioTracksTokenRatio) {
  const double r = static_cast<double>(count_activations(long_arch(TokenizerFamily::spectttra))) /
                   static_cast<double>(count_activations(long_arch(TokenizerFamily::vit)));
  const double target = 559.0 / 1872.0;
  EXPECT_NEAR(r, target, 0.25 * target);
}

TEST(Report, FieldsAreConsistent) {
  const SpectrogramConfig sc;
  const auto r = profile(long_arch(TokenizerFamily::spectttra), sc);
  EXPECT_EQ(r.model, "spectttra-gamma");
  EXPECT_EQ(r.n_tokens, 559);
  EXPECT_NEAR(r.input_seconds, (2048.0 + 3743.0 * 512.0) / 16000.0, 1e-12);
  EXPECT_EQ(r.peak_bytes_estimate, r.activations * 4 * r.memory_batch_size);
  EXPECT_EQ(r.params, count_params(long_arch(TokenizerFamily::spectttra)));
  const auto row = profile_csv_row(r);
  EXPECT_EQ(row.rfind("spectttra-gamma,3744,", 0), 0u);
  EXPECT_NE(profile_text(r).find("559"), std::string::npos);
  EXPECT_EQ(profile(long_arch(TokenizerFamily::vit), sc).model, "vit-p16");
}

TEST(Speed, TimerAndStability) {
  const double res = timer_resolution();
  EXPECT_GT(res, 0.0);
  EXPECT_LT(res, 1e-3);
  const auto a = small_arch(TokenizerFamily::spectttra, 256);
  Rng rng(2);
  const auto p = init_params<float>(a, rng);
  const auto first = measure_speed(p, a, 8.0, {5, 100, 1});
  const auto second = measure_speed(p, a, 8.0, {5, 100, 1});
  EXPECT_GT(first.audio_per_second, 0.0);
  EXPECT_NEAR(first.audio_per_second, 8.0 / first.mean_seconds, 1e-9);
  const double ratio = first.mean_seconds / second.mean_seconds;
  EXPECT_GT(ratio, 1.0 / 1.2);
  EXPECT_LT(ratio, 1.2);
  EXPECT_FALSE(machine_descriptor().empty());
  EXPECT_THROW(measure_speed(p, a, 8.0, {5, 0, 1}), std::invalid_argument);
}

TEST(Speed, GrowthExponents) {
  EXPECT_GT(growth_exponent(TokenizerFamily::vit), 1.05);
  EXPECT_LT(growth_exponent(TokenizerFamily::spectttra), 1.9);
}
