#include "test_support.hpp"
#include "valse/faithfulness.hpp"
#include "valse/relevance.hpp"

using namespace valse;
using namespace valse::testing;

namespace {

struct Fixture {
  ModelConfig c = small_config(2, 2, 16, 3);
  ToyModel m = build_model(c);
  PatchGrid img = random_image(c, 4);
  TokenSequence seq = random_sequence(c, 2, 3, 4);
  std::size_t pos = seq.size() - 1;
};

}  // namespace

TEST(Faithfulness, Endpoints) {
  const Fixture f;
  const ContributionMap map = contribution_map_for_token(f.m, f.img, f.seq, f.pos);
  const double full = token_probability(f.m, f.img, f.seq, f.pos);
  const FaithfulnessCurve ins = faithfulness_curve(f.m, f.img, f.seq, f.pos, map, CurveMode::kInsertion);
  const FaithfulnessCurve del = faithfulness_curve(f.m, f.img, f.seq, f.pos, map, CurveMode::kDeletion);
  EXPECT_EQ(ins.y.back(), full);
  EXPECT_EQ(del.y.front(), full);
  EXPECT_EQ(ins.y.front(), del.y.back());
  ASSERT_EQ(ins.x.size(), 10u);
  EXPECT_EQ(ins.x.front(), 0.0);
  EXPECT_EQ(ins.x.back(), 1.0);
  for (std::size_t i = 1; i < ins.x.size(); ++i) EXPECT_GT(ins.x[i], ins.x[i - 1]);
  EXPECT_DOUBLE_EQ(ins.auc, trapezoid_auc(ins.x, ins.y));
}

TEST(Faithfulness, ConstantMapUsesIndexOrder) {
  const Fixture f;
  ContributionMap flat;
  flat.grid_rows = 3;
  flat.grid_cols = 3;
  flat.values.assign(9, 1.0);
  std::vector<std::size_t> identity(9);
  for (std::size_t i = 0; i < 9; ++i) identity[i] = i;
  EXPECT_EQ(patch_order(flat, PatchOrder::map_rank()), identity);
  ContributionMap ramp = flat;
  for (std::size_t i = 0; i < 9; ++i) ramp.values[i] = 9.0 - static_cast<double>(i);
  const auto a = faithfulness_curve(f.m, f.img, f.seq, f.pos, flat, CurveMode::kDeletion);
  const auto b = faithfulness_curve(f.m, f.img, f.seq, f.pos, ramp, CurveMode::kDeletion);
  EXPECT_EQ(a.y, b.y);
}

TEST(Faithfulness, RandomOrderIgnoresMapContents) {
  const Fixture f;
  ContributionMap a;
  a.grid_rows = 3;
  a.grid_cols = 3;
  a.values = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  ContributionMap b = a;
  std::reverse(b.values.begin(), b.values.end());
  const auto ca = faithfulness_curve(f.m, f.img, f.seq, f.pos, a, CurveMode::kInsertion, PatchOrder::random(3));
  const auto cb = faithfulness_curve(f.m, f.img, f.seq, f.pos, b, CurveMode::kInsertion, PatchOrder::random(3));
  EXPECT_EQ(ca.y, cb.y);
}

TEST(Faithfulness, Errors) {
  const Fixture f;
  ContributionMap bad;
  bad.grid_rows = 2;
  bad.grid_cols = 2;
  bad.values.assign(4, 0.0);
  EXPECT_VALSE_ERROR(faithfulness_curve(f.m, f.img, f.seq, f.pos, bad, CurveMode::kInsertion),
                     ErrorCode::kGridMismatch);
  const ContributionMap map = contribution_map_for_token(f.m, f.img, f.seq, f.pos);
  EXPECT_VALSE_ERROR(faithfulness_curve(f.m, f.img, f.seq, 0, map, CurveMode::kInsertion),
                     ErrorCode::kPositionOutOfRange);
}

TEST(RawAttentionMap, HeadAverageOfRow) {
  const Fixture f;
  const ForwardTrace t = forward(f.m, f.seq, f.img);
  const ContributionMap r = raw_attention_map(t, 1, 11, 3, 3);
  for (std::size_t j = 0; j < 9; ++j) {
    EXPECT_NEAR(r.values[j], 0.5 * (t.attention[1][0](11, j) + t.attention[1][1](11, j)), 1e-15);
  }
  EXPECT_VALSE_ERROR(raw_attention_map(t, 2, 0, 3, 3), ErrorCode::kLayerOutOfRange);
  EXPECT_VALSE_ERROR(raw_attention_map(t, 0, t.n, 3, 3), ErrorCode::kPositionOutOfRange);
}
