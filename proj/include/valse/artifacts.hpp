#pragma once

// Artifact positions are image indices that light up in the contribution
// map of a non-semantic token (the sequence-begin token by default). They
// are located on that reference map and then flattened in target maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "valse/relevance.hpp"

namespace valse {

inline constexpr double kDefaultArtifactK = 2.5;

enum class ArtifactStrategy : std::uint8_t { kZScore, kTopN, kCumulativeRatio };

struct ArtifactProfile {
  int sys_token = kBosToken;
  ArtifactStrategy strategy = ArtifactStrategy::kZScore;
  double k = kDefaultArtifactK;       // z-score multiplier
  std::size_t top_n = 0;              // for kTopN
  double ratio = 0.0;                 // for kCumulativeRatio
  std::vector<std::size_t> positions; // ascending
  std::vector<double> stats;          // z-score of every reference entry
};

inline std::size_t find_token(const TokenSequence& seq, int token) {
  for (std::size_t i = seq.n_image; i < seq.size(); ++i)
    if (seq.ids[i] == token) return i;
  fail(ErrorCode::kTokenNotFound, "token " + std::to_string(token) + " not in sequence");
}

/// Contribution map of the non-semantic token's own logit at its position.
inline ContributionMap reference_contribution_map(const ToyModel& model, const PatchGrid& image,
                                                  const TokenSequence& seq,
                                                  int sys_token = kBosToken,
                                                  const ForwardHooks& hooks = {}) {
  const std::size_t pos = find_token(seq, sys_token);
  return contribution_map_for_target(model, image, seq, pos, sys_token, pos, hooks);
}

namespace detail {

inline std::vector<double> zscores(const std::vector<double>& v, double& mean, double& sd) {
  mean = v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  sd = v.empty() ? 0.0 : std::sqrt(var / static_cast<double>(v.size()));
  std::vector<double> z(v.size(), 0.0);
  if (sd > 0.0)
    for (std::size_t i = 0; i < v.size(); ++i) z[i] = (v[i] - mean) / sd;
  return z;
}

// Indices sorted by descending value, ties by ascending index.
inline std::vector<std::size_t> descending_order(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

}  // namespace detail

/// P = { i : ref[i] > mean(ref) + k * std(ref) } with the population std.
inline ArtifactProfile detect_artifact_positions(const ContributionMap& ref,
                                                 double k = kDefaultArtifactK,
                                                 int sys_token = kBosToken) {
  if (!(k > 0.0)) fail(ErrorCode::kInvalidArgument, "k must be positive");
  ArtifactProfile p;
  p.sys_token = sys_token;
  p.strategy = ArtifactStrategy::kZScore;
  p.k = k;
  double mean = 0.0;
  double sd = 0.0;
  p.stats = detail::zscores(ref.values, mean, sd);
  for (std::size_t i = 0; i < ref.values.size(); ++i) {
    if (ref.values[i] > mean + k * sd) p.positions.push_back(i);
  }
  return p;
}

/// The n highest reference entries.
inline ArtifactProfile detect_top_n(const ContributionMap& ref, std::size_t n,
                                    int sys_token = kBosToken) {
  ArtifactProfile p;
  p.sys_token = sys_token;
  p.strategy = ArtifactStrategy::kTopN;
  p.top_n = n;
  double mean = 0.0;
  double sd = 0.0;
  p.stats = detail::zscores(ref.values, mean, sd);
  const auto order = detail::descending_order(ref.values);
  p.positions.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n, order.size())));
  std::sort(p.positions.begin(), p.positions.end());
  return p;
}

/// Smallest top-ranked set whose share of the total reference mass reaches
/// `ratio`.
inline ArtifactProfile detect_cumulative_ratio(const ContributionMap& ref, double ratio,
                                               int sys_token = kBosToken) {
  if (ratio < 0.0 || ratio > 1.0) fail(ErrorCode::kInvalidArgument, "ratio outside [0,1]");
  ArtifactProfile p;
  p.sys_token = sys_token;
  p.strategy = ArtifactStrategy::kCumulativeRatio;
  p.ratio = ratio;
  double mean = 0.0;
  double sd = 0.0;
  p.stats = detail::zscores(ref.values, mean, sd);
  const double total = std::accumulate(ref.values.begin(), ref.values.end(), 0.0);
  if (total <= 0.0 || ratio == 0.0) return p;
  double acc = 0.0;
  for (std::size_t i : detail::descending_order(ref.values)) {
    if (acc >= ratio * total) break;
    p.positions.push_back(i);
    acc += ref.values[i];
  }
  std::sort(p.positions.begin(), p.positions.end());
  return p;
}

/// Replaces values at the profile positions with the minimum of the
/// untouched entries.
inline ContributionMap suppress_artifacts(const ContributionMap& map, const ArtifactProfile& profile) {
  if (!profile.stats.empty() && profile.stats.size() != map.values.size()) {
    fail(ErrorCode::kShapeMismatch, "profile built for a different N_i");
  }
  ContributionMap out = map;
  if (profile.positions.empty()) return out;
  std::vector<bool> hit(map.values.size(), false);
  for (std::size_t p : profile.positions) {
    if (p >= map.values.size()) fail(ErrorCode::kShapeMismatch, "artifact position out of range");
    hit[p] = true;
  }
  double floor_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < map.values.size(); ++i)
    if (!hit[i]) floor_value = std::min(floor_value, map.values[i]);
  if (!std::isfinite(floor_value)) floor_value = 0.0;
  for (std::size_t i = 0; i < map.values.size(); ++i)
    if (hit[i]) out.values[i] = std::min(out.values[i], floor_value);
  for (std::size_t p : profile.positions)
    if (std::find(out.suppressed.begin(), out.suppressed.end(), p) == out.suppressed.end())
      out.suppressed.push_back(p);
  std::sort(out.suppressed.begin(), out.suppressed.end());
  return out;
}

/// 2-D PCA of the image-token hidden states after `layer`.
inline Matrix hidden_state_pca(const ForwardTrace& trace, std::size_t layer) {
  if (layer >= trace.hidden.size()) fail(ErrorCode::kLayerOutOfRange, "layer " + std::to_string(layer));
  const Matrix& h = trace.hidden[layer];
  Matrix pts(trace.n_image, h.cols());
  for (std::size_t i = 0; i < trace.n_image; ++i)
    std::copy(h.row(i).begin(), h.row(i).end(), pts.row(i).begin());
  try {
    return pca_project(pts, std::min<std::size_t>(2, h.cols()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kRankDeficient) return Matrix(trace.n_image, 2);
    throw;
  }
}

}  // namespace valse
