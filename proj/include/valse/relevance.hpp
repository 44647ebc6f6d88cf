#pragma once

// Visual contribution maps: gradient-weighted head aggregation followed by
// additive rollout C^{l+1} = C^l + Abar_l C^l from C^0 = I. The map for a
// token is the image slice of the row that predicts it.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "valse/toyvlm.hpp"

namespace valse {

enum class MapNormalization : std::uint8_t { kNone, kMax1 };

struct ContributionMap {
  std::size_t position = 0;  // sequence position of the explained token
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::vector<double> values;             // raw, nonnegative, row-major
  std::vector<std::size_t> suppressed;    // image indices replaced by artifact suppression
  MapNormalization normalization = MapNormalization::kNone;

  std::size_t size() const { return values.size(); }

  /// Values scaled so the maximum is 1 (unchanged when the map is all zero).
  std::vector<double> display_values() const {
    const double mx = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
    std::vector<double> out = values;
    if (mx > 0.0)
      for (double& v : out) v /= mx;
    return out;
  }
};

/// sum_h (grad_h * attn_h)^+, rectified per head after the product.
inline Matrix aggregate_heads(const std::vector<Matrix>& attn, const std::vector<Matrix>& grads) {
  if (attn.empty() || attn.size() != grads.size()) {
    fail(ErrorCode::kShapeMismatch, "head counts differ or are zero");
  }
  Matrix out(attn[0].rows(), attn[0].cols());
  for (std::size_t h = 0; h < attn.size(); ++h) {
    attn[h].require_same_shape(out);
    grads[h].require_same_shape(out);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double v = grads[h].data()[i] * attn[h].data()[i];
      if (v > 0.0) out.data()[i] += v;
    }
  }
  return out;
}

/// Every intermediate C^0 .. C^L.
inline std::vector<Matrix> rollout_history(const std::vector<Matrix>& aggregated) {
  if (aggregated.empty()) fail(ErrorCode::kShapeMismatch, "no layers to roll out");
  const std::size_t n = aggregated[0].rows();
  std::vector<Matrix> history{Matrix::identity(n)};
  for (const Matrix& abar : aggregated) {
    if (abar.rows() != n || abar.cols() != n) {
      fail(ErrorCode::kShapeMismatch, "inconsistent N across layers");
    }
    const Matrix& c = history.back();
    history.push_back(c + matmul(abar, c));
  }
  return history;
}

inline Matrix rollout(const std::vector<Matrix>& aggregated) {
  return rollout_history(aggregated).back();
}

/// Last row of `c_final`, first `n_image` entries, as a row-major grid.
inline ContributionMap extract_visual_map(const Matrix& c_final, std::size_t n_image,
                                          std::size_t grid_rows, std::size_t grid_cols,
                                          std::size_t position = 0) {
  if (grid_rows * grid_cols != n_image) fail(ErrorCode::kGridMismatch, "grid product != N_i");
  if (c_final.rows() == 0 || n_image > c_final.cols()) {
    fail(ErrorCode::kGridMismatch, "N_i exceeds sequence length");
  }
  ContributionMap map;
  map.position = position;
  map.grid_rows = grid_rows;
  map.grid_cols = grid_cols;
  const auto last = c_final.row(c_final.rows() - 1);
  map.values.assign(last.begin(), last.begin() + static_cast<std::ptrdiff_t>(n_image));
  return map;
}

/// Aggregated attention for the logit of `token_id` at `row`, computed on the
/// sequence truncated after `row` so that `row` is the last position.
inline std::vector<Matrix> aggregated_attention_for_target(const ToyModel& model,
                                                           const PatchGrid& image,
                                                           const TokenSequence& seq,
                                                           std::size_t row, int token_id,
                                                           const ForwardHooks& hooks = {}) {
  if (row >= seq.size()) fail(ErrorCode::kPositionOutOfRange, "target row beyond sequence");
  const TokenSequence prefix = seq.prefix(row + 1);
  const ForwardTrace trace = forward(model, prefix, image, hooks);
  const auto grads = backward_token_logit(model, prefix, image, trace, row, token_id);
  std::vector<Matrix> aggregated;
  aggregated.reserve(grads.size());
  for (std::size_t l = 0; l < grads.size(); ++l) {
    aggregated.push_back(aggregate_heads(trace.attention[l], grads[l]));
  }
  return aggregated;
}

inline ContributionMap contribution_map_for_target(const ToyModel& model, const PatchGrid& image,
                                                   const TokenSequence& seq, std::size_t row,
                                                   int token_id, std::size_t explained_position,
                                                   const ForwardHooks& hooks = {}) {
  const auto aggregated = aggregated_attention_for_target(model, image, seq, row, token_id, hooks);
  const Matrix c = rollout(aggregated);
  return extract_visual_map(c, seq.n_image, image.rows, image.cols, explained_position);
}

/// Map for the response token at `position`; its logit lives one row earlier.
inline ContributionMap contribution_map_for_token(const ToyModel& model, const PatchGrid& image,
                                                  const TokenSequence& seq, std::size_t position,
                                                  const ForwardHooks& hooks = {}) {
  if (position >= seq.size() || position == 0 || seq.roles[position] != Role::kResponse) {
    fail(ErrorCode::kPositionOutOfRange,
         "position " + std::to_string(position) + " is not a response token");
  }
  return contribution_map_for_target(model, image, seq, position - 1, seq.ids[position], position,
                                     hooks);
}

}  // namespace valse
