#include <cmath>
#include <limits>

#include "test_support.hpp"
#include "valse/steering.hpp"

using namespace valse;
using namespace valse::testing;

namespace {

ContributionMap map_of(std::vector<double> values, std::size_t rows, std::size_t cols) {
  ContributionMap m;
  m.grid_rows = rows;
  m.grid_cols = cols;
  m.values = std::move(values);
  return m;
}

std::vector<CorpusItem> random_corpus(const ModelConfig& c, std::size_t n) {
  std::vector<CorpusItem> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({random_image(c, 500 + i), random_sequence(c, 2, 0, 600 + i)});
  return out;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(BuildMask, ZeroFractionKeepsEverything) {
  const MaskSpec m = build_mask(map_of({3, 1, 2, 0}, 2, 2), MaskRule::percent(0.0));
  EXPECT_EQ(m.masked_count(), 0u);
  const PatchGrid img = random_image(small_config(), 1);
  EXPECT_EQ(compose_and_apply(img, {m}).values, img.values);
}

TEST(BuildMask, LowestHalfMasked) {
  const MaskSpec m = build_mask(map_of({1, 2, 3, 4}, 2, 2), MaskRule::percent(0.5));
  EXPECT_EQ(m.keep, (std::vector<bool>{false, false, true, true}));
}

TEST(BuildMask, TiesMaskLowerIndexFirst) {
  const MaskSpec m = build_mask(map_of({1, 1, 1, 1}, 2, 2), MaskRule::percent(0.5));
  EXPECT_EQ(m.keep, (std::vector<bool>{false, false, true, true}));
}

TEST(BuildMask, AdaptiveMeanMasksBelowMean) {
  const MaskSpec m = build_mask(map_of({0, 0, 0, 10}, 2, 2), MaskRule::adaptive_mean());
  EXPECT_EQ(m.keep, (std::vector<bool>{false, false, false, true}));
}

TEST(BuildMask, CountIsFloorForEveryFraction) {
  for (std::size_t n : {1u, 4u, 9u, 16u, 25u, 49u}) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>((7 * i) % n);
    for (int k = 0; k <= 100; ++k) {
      const double p = k / 100.0;
      const std::size_t expected = (static_cast<std::size_t>(k) * n) / 100;
      EXPECT_EQ(build_mask(map_of(v, 1, n), MaskRule::percent(p)).masked_count(), expected) << n << " " << p;
      EXPECT_EQ(random_mask(1, n, p, 3).masked_count(), expected);
    }
  }
  EXPECT_VALSE_ERROR(masked_patch_count(1.5, 4), ErrorCode::kInvalidArgument);
}

TEST(ComposeAndApply, AllMaskedMeanFill) {
  const ModelConfig c = small_config();
  const PatchGrid img = random_image(c, 3);
  const MaskSpec all = build_mask(map_of({1, 2, 3, 4}, 2, 2), MaskRule::percent(1.0));
  const PatchGrid out = compose_and_apply(img, {all});
  for (double v : out.values) EXPECT_DOUBLE_EQ(v, img.mean());
}

TEST(ComposeAndApply, OrderIndependentAndLocal) {
  const ModelConfig c = small_config(1, 1, 8, 4);
  const PatchGrid img = random_image(c, 4);
  const MaskSpec a = random_mask(4, 4, 0.5, 1);
  const MaskSpec b = random_mask(4, 4, 0.25, 2);
  const PatchGrid ab = compose_and_apply(img, {a, b});
  EXPECT_EQ(ab.values, compose_and_apply(img, {b, a}).values);
  for (std::size_t i = 0; i < 16; ++i) {
    if (a.keep[i] && b.keep[i]) {
      for (std::size_t ch = 0; ch < c.patch_dim; ++ch) EXPECT_EQ(ab.patch(i)[ch], img.patch(i)[ch]);
    }
  }
}

TEST(ComposeAndApply, FillModes) {
  const ModelConfig c = small_config(1, 1, 8, 4);
  const PatchGrid img = random_image(c, 5);
  MaskSpec m = random_mask(4, 4, 0.5, 9, FillMode::kZero);
  const PatchGrid z = compose_and_apply(img, {m});
  for (std::size_t i = 0; i < 16; ++i)
    if (!m.keep[i]) {
      for (double v : z.patch(i)) EXPECT_EQ(v, 0.0);
    }
  m.fill = FillMode::kGaussNoise;
  EXPECT_EQ(compose_and_apply(img, {m}, 4).values, compose_and_apply(img, {m}, 4).values);
  m.fill = FillMode::kGaussBlur;
  const PatchGrid blur = compose_and_apply(img, {m});
  for (double v : blur.values) EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(parse_fill("mean"), FillMode::kMean);
  EXPECT_EQ(parse_fill("gauss_blur"), FillMode::kGaussBlur);
  EXPECT_VALSE_ERROR(parse_fill("sepia"), ErrorCode::kInvalidArgument);
}

TEST(ComposeAndApply, GridMismatch) {
  const PatchGrid img = random_image(small_config(), 1);
  EXPECT_VALSE_ERROR(compose_and_apply(img, {random_mask(3, 3, 0.5, 1)}), ErrorCode::kGridMismatch);
}

TEST(PairedSamples, PairsShareResponseAndDifferOnlyWhereMasked) {
  const ModelConfig c = small_config(2, 2, 16, 3);
  const ToyModel m = build_model(c);
  PairingOptions opts;
  opts.alpha = -std::numeric_limits<double>::infinity();
  opts.max_new = 4;
  const auto corpus = random_corpus(c, 6);
  const auto pairs = build_paired_samples(m, corpus, opts);
  ASSERT_FALSE(pairs.empty());
  for (const auto& p : pairs) {
    const Generation g = generate(m, p.original, p.sequence, opts.max_new);
    EXPECT_EQ(g.sequence, p.sequence);
    EXPECT_FALSE(p.selection.positions.empty());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < p.original.num_patches(); ++i) {
      bool diff = false;
      for (std::size_t ch = 0; ch < c.patch_dim; ++ch) diff = diff || p.original.patch(i)[ch] != p.masked.patch(i)[ch];
      changed += diff ? 1 : 0;
    }
    EXPECT_GE(changed, masked_patch_count(kDefaultMaskP, 9) - 1);
  }
}

TEST(PairedSamples, InfiniteAlphaHasNoVisionAwareSamples) {
  const ModelConfig c = small_config();
  PairingOptions opts;
  opts.alpha = std::numeric_limits<double>::infinity();
  EXPECT_VALSE_ERROR(build_paired_samples(build_model(c), random_corpus(c, 3), opts),
                     ErrorCode::kNoVisionAwareSamples);
  EXPECT_VALSE_ERROR(build_paired_samples(build_model(c), {}, opts), ErrorCode::kInvalidArgument);
}

TEST(PairedSamples, Defaults) {
  const PairingOptions opts;
  EXPECT_EQ(opts.alpha, 3.0);
  EXPECT_EQ(opts.rule.p, 0.9);
  EXPECT_EQ(opts.fill, FillMode::kMean);
  EXPECT_EQ(kDefaultBeta, 0.5);
}

TEST(FitSteering, SinglePairIsNormalisedDifference) {
  const Matrix e{{3.0, -4.0, 0.0}};
  const SteeringBundle b = fit_steering_from_differences({e, e});
  for (const auto& d : b.directions) {
    EXPECT_NEAR(d[0], 0.6, 1e-10);
    EXPECT_NEAR(d[1], -0.8, 1e-10);
    EXPECT_NEAR(d[2], 0.0, 1e-10);
  }
  EXPECT_NEAR(b.singular_values[0], 5.0, 1e-10);
  EXPECT_EQ(b.num_samples, 1u);
}

TEST(FitSteering, DegenerateDifference) {
  EXPECT_VALSE_ERROR(fit_steering_from_differences({Matrix(3, 4)}), ErrorCode::kDegenerateDifference);
  EXPECT_VALSE_ERROR(fit_steering(build_model(small_config()), {}), ErrorCode::kNoVisionAwareSamples);
}

TEST(FitSteering, DuplicatingPairsScalesSigma) {
  const Matrix e = random_matrix(6, 5, 12);
  Matrix dup(12, 5);
  for (std::size_t r = 0; r < 12; ++r)
    for (std::size_t j = 0; j < 5; ++j) dup(r, j) = e(r % 6, j);
  const SteeringBundle a = fit_steering_from_differences({e});
  const SteeringBundle b = fit_steering_from_differences({dup});
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(a.directions[0][j], b.directions[0][j], 1e-8);
  EXPECT_NEAR(b.singular_values[0], std::sqrt(2.0) * a.singular_values[0], 1e-9);
}

TEST(FitSteering, UnitNormAndOrientedOnRealPairs) {
  const ModelConfig c = small_config(3, 2, 16, 3);
  const ToyModel m = build_model(c);
  PairingOptions opts;
  opts.alpha = -std::numeric_limits<double>::infinity();
  opts.max_new = 4;
  const auto pairs = build_paired_samples(m, random_corpus(c, 8), opts);
  const SteeringBundle b = fit_steering(m, pairs);
  ASSERT_EQ(b.num_layers(), 3u);
  EXPECT_EQ(b.dim(), 16u);
  const auto diffs = feature_differences(m, pairs);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_NEAR(norm(b.directions[l]), 1.0, 1e-10);
    double orient = 0.0;
    for (std::size_t r = 0; r < diffs[l].rows(); ++r) orient += dot(diffs[l].row(r), b.directions[l]);
    EXPECT_GE(orient, 0.0);
  }
}

TEST(ApplySteering, ZeroBetaIsBitwiseIdentity) {
  const ModelConfig c = small_config(2, 2, 16, 3);
  const ToyModel m = build_model(c);
  SteeringBundle b;
  for (std::size_t l = 0; l < 2; ++l) b.directions.push_back(std::vector<double>(16, 0.25));
  const SteeringContext ctx = apply_steering(m, b, 0.0);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const PatchGrid img = random_image(c, s);
    const TokenSequence prompt = random_sequence(c, 2, 0, s);
    const Generation base = generate(m, img, prompt, 6);
    const Generation steered = ctx.generate(img, prompt, 6);
    EXPECT_EQ(base.sequence, steered.sequence);
    EXPECT_TRUE(base.trace.logits == steered.trace.logits);
  }
}

TEST(ApplySteering, OppositeStackedContextsCancel) {
  const ModelConfig c = small_config(2, 2, 16, 3);
  const ToyModel m = build_model(c);
  SteeringBundle b;
  b.directions = {std::vector<double>(16, 0.25), std::vector<double>(16, -0.25)};
  const SteeringContext up = apply_steering(m, b, 0.7);
  const SteeringContext back = up.stacked(b, -0.7);
  const PatchGrid img = random_image(c, 1);
  const TokenSequence seq = random_sequence(c, 2, 3, 2);
  const Matrix base = forward(m, seq, img).logits;
  const Matrix restored = back.forward(seq, img).logits;
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(base.data()[i], restored.data()[i], 1e-10);
  EXPECT_FALSE(up.forward(seq, img).logits == base);
}

TEST(ApplySteering, ShiftEntersAfterFirstMlp) {
  const ModelConfig c = small_config(2, 2, 16, 3);
  const ToyModel m = build_model(c);
  SteeringBundle b;
  b.directions = {std::vector<double>(16, 0.25), std::vector<double>(16, 0.25)};
  const PatchGrid img = random_image(c, 1);
  const TokenSequence seq = random_sequence(c, 2, 3, 2);
  const ForwardTrace base = forward(m, seq, img);
  const ForwardTrace steered = apply_steering(m, b, 1.5).forward(seq, img);
  for (std::size_t h = 0; h < c.num_heads; ++h) EXPECT_TRUE(base.attention[0][h] == steered.attention[0][h]);
  EXPECT_FALSE(base.attention[1][0] == steered.attention[1][0]);
}

TEST(ApplySteering, LayerCountMismatch) {
  const ToyModel m = build_model(small_config(2));
  SteeringBundle b;
  b.directions = {std::vector<double>(16, 0.0)};
  EXPECT_VALSE_ERROR(apply_steering(m, b, 0.5), ErrorCode::kLayerCountMismatch);
}
