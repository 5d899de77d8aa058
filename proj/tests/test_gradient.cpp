#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support/gradcheck.hpp"

using namespace spectttra;
using spectttra::check::CheckResult;
using spectttra::check::finite_difference_check;
using spectttra::check::tiny_arch;

class GradientCheck : public ::testing::TestWithParam<std::tuple<Variant, bool, bool>> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const auto [variant, temporal, spectral] = GetParam();
  const Architecture arch = tiny_arch(variant, temporal, spectral);
  const CheckResult r = finite_difference_check(arch, 42);
  EXPECT_EQ(static_cast<std::int64_t>(r.checked), count_params(arch));
  EXPECT_LE(r.max_rel, 1e-4) << "worst at " << r.worst;
}

INSTANTIATE_TEST_SUITE_P(Variants, GradientCheck,
                         ::testing::Values(std::make_tuple(Variant::alpha, true, true),
                                           std::make_tuple(Variant::beta, true, true),
                                           std::make_tuple(Variant::gamma, true, true),
                                           std::make_tuple(Variant::gamma, true, false),
                                           std::make_tuple(Variant::gamma, false, true)));

TEST(GradientCheck, VitBaseline) {
  Architecture arch = tiny_arch(Variant::gamma);
  arch.tokenizer.family = TokenizerFamily::vit;
  arch.tokenizer.patch.p = 8;
  const CheckResult r = finite_difference_check(arch, 7);
  EXPECT_LE(r.max_rel, 1e-4) << "worst at " << r.worst;
}
