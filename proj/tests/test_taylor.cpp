#include <algorithm>

#include "test_support.hpp"
#include "valse/taylor.hpp"

using namespace valse;
using namespace valse::testing;

TEST(Taylor, ZeroEpsilonIsExact) {
  const ModelConfig c = small_config(2, 2, 16, 3);
  const ToyModel m = build_model(c);
  const TokenSequence seq = random_sequence(c, 2, 3, 1);
  const TaylorReport r = taylor_check(m, random_image(c, 1), seq, seq.size() - 1, 0.0);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_EQ(r.residual, 0.0);
}

TEST(Taylor, RemainderIsQuadratic) {
  const ModelConfig c = small_config(2, 2, 16, 3);
  std::vector<double> ratios;
  for (std::uint64_t t = 0; t < 20; ++t) {
    ModelConfig ct = c;
    ct.seed = 100 + t;
    const ToyModel m = build_model(ct);
    const TokenSequence seq = random_sequence(ct, 2, 3, t);
    const TaylorReport r = taylor_check(m, random_image(ct, t), seq, seq.size() - 1, 1e-3);
    EXPECT_GT(r.residual, 0.0);
    ratios.push_back(r.ratio_at_half_eps);
  }
  std::nth_element(ratios.begin(), ratios.begin() + 10, ratios.end());
  EXPECT_GE(ratios[10], 3.5);
  EXPECT_LE(ratios[10], 4.5);
}

TEST(Taylor, ResidualShrinksWithEpsilon) {
  const ModelConfig c = small_config(2, 2, 16, 3);
  const ToyModel m = build_model(c);
  const TokenSequence seq = random_sequence(c, 2, 3, 5);
  double prev = 1e300;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const double r = taylor_check(m, random_image(c, 5), seq, seq.size() - 1, eps).residual;
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(Taylor, LinearHeadIsExactAtAnyEpsilon) {
  const ToyModel m = linear_attention_model(small_config(1, 2, 16, 3));
  const TokenSequence seq = random_sequence(m.config(), 2, 3, 8);
  for (double eps : {1e-3, 0.1, 0.5, 1.0}) {
    EXPECT_LE(taylor_check(m, random_image(m.config(), 8), seq, seq.size() - 1, eps).residual, 1e-8);
  }
}

TEST(Taylor, Errors) {
  const ModelConfig c = small_config();
  const ToyModel m = build_model(c);
  const TokenSequence seq = random_sequence(c, 2, 2, 1);
  const PatchGrid img = random_image(c, 1);
  EXPECT_VALSE_ERROR(taylor_check(m, img, seq, seq.size() - 1, -1.0), ErrorCode::kInvalidArgument);
  EXPECT_VALSE_ERROR(taylor_check(m, img, seq, 0, 1e-3), ErrorCode::kPositionOutOfRange);
  EXPECT_VALSE_ERROR(taylor_check(m, img, seq, seq.size(), 1e-3), ErrorCode::kPositionOutOfRange);
}
