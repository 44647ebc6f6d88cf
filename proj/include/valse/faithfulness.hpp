#pragma once

// Insertion/deletion curves: reveal (or remove) patches in map order and
// track the teacher-forced probability of the explained token.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "valse/relevance.hpp"
#include "valse/steering.hpp"
#include "valse/toyvlm.hpp"

namespace valse {

enum class CurveMode : std::uint8_t { kInsertion, kDeletion };

struct PatchOrder {
  enum class Kind : std::uint8_t { kMapRank, kRandom } kind = Kind::kMapRank;
  std::uint64_t seed = 0;

  static PatchOrder map_rank() { return {Kind::kMapRank, 0}; }
  static PatchOrder random(std::uint64_t seed) { return {Kind::kRandom, seed}; }
};

struct FaithfulnessCurve {
  CurveMode mode = CurveMode::kInsertion;
  std::vector<double> x;  // fraction of patches revealed / removed
  std::vector<double> y;  // probability of the explained token
  double auc = 0.0;
};

inline double trapezoid_auc(const std::vector<double>& x, const std::vector<double>& y) {
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return area;
}

/// Probability of the realised token at `position` (predicted from the row
/// before it) under teacher forcing.
inline double token_probability(const ToyModel& model, const PatchGrid& image,
                                const TokenSequence& seq, std::size_t position) {
  const TokenSequence prefix = seq.prefix(position);
  const ForwardTrace t = forward(model, prefix, image);
  const auto logp = log_softmax_row(t.logits.row(position - 1));
  return std::exp(logp[static_cast<std::size_t>(seq.ids[position])]);
}

inline std::vector<std::size_t> patch_order(const ContributionMap& map, const PatchOrder& order) {
  std::vector<std::size_t> idx(map.values.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (order.kind == PatchOrder::Kind::kMapRank) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return map.values[a] > map.values[b]; });
  } else {
    std::mt19937_64 rng(order.seed);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng() % i)]);
  }
  return idx;
}

inline FaithfulnessCurve faithfulness_curve(const ToyModel& model, const PatchGrid& image,
                                            const TokenSequence& seq, std::size_t position,
                                            const ContributionMap& map, CurveMode mode,
                                            const PatchOrder& order = PatchOrder::map_rank()) {
  if (map.grid_rows != image.rows || map.grid_cols != image.cols ||
      map.values.size() != image.num_patches()) {
    fail(ErrorCode::kGridMismatch, "map does not match image grid");
  }
  if (position == 0 || position >= seq.size()) fail(ErrorCode::kPositionOutOfRange, "bad position");
  const std::size_t n = image.num_patches();
  const auto ranked = patch_order(map, order);
  FaithfulnessCurve curve;
  curve.mode = mode;
  // keep[i] is true when patch i shows the original content.
  std::vector<bool> keep(n, mode == CurveMode::kDeletion);
  for (std::size_t step = 0; step <= n; ++step) {
    if (step > 0) keep[ranked[step - 1]] = (mode == CurveMode::kInsertion);
    const PatchGrid shown = apply_keep(image, keep, FillMode::kMean);
    curve.x.push_back(static_cast<double>(step) / static_cast<double>(n));
    curve.y.push_back(token_probability(model, shown, seq, position));
  }
  curve.auc = trapezoid_auc(curve.x, curve.y);
  return curve;
}

/// Head-averaged attention of one layer, image slice of `row`. Used only as a
/// comparison baseline for rollout maps.
inline ContributionMap raw_attention_map(const ForwardTrace& trace, std::size_t layer, std::size_t row,
                                         std::size_t grid_rows, std::size_t grid_cols) {
  if (layer >= trace.attention.size()) fail(ErrorCode::kLayerOutOfRange, "layer");
  if (row >= trace.n) fail(ErrorCode::kPositionOutOfRange, "row");
  ContributionMap m;
  m.position = row;
  m.grid_rows = grid_rows;
  m.grid_cols = grid_cols;
  m.values.assign(trace.n_image, 0.0);
  const auto& heads = trace.attention[layer];
  for (const Matrix& a : heads)
    for (std::size_t j = 0; j < trace.n_image; ++j) m.values[j] += a(row, j) / static_cast<double>(heads.size());
  return m;
}

}  // namespace valse
