#pragma once

// Visual-token selection by log-likelihood ratio between a pass with the
// real image and a pass with a noise image.

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "valse/toyvlm.hpp"

namespace valse {

inline constexpr double kNoiseStd = 0.1;
inline constexpr double kDefaultAlpha = 3.0;

/// Box-Muller on a 64-bit Mersenne engine, so results do not depend on the
/// standard library's distribution implementation.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}
  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = detail::unit_uniform(rng_);
    } while (u1 <= 0.0);
    const double u2 = detail::unit_uniform(rng_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline PatchGrid make_noise_image(std::size_t rows, std::size_t cols, std::size_t patch_dim,
                                  std::uint64_t seed, double stddev = kNoiseStd) {
  PatchGrid g(rows, cols, patch_dim);
  GaussianSource src(seed);
  for (double& v : g.values) v = stddev * src.next();
  return g;
}

struct LlrEntry {
  int token_id = 0;
  std::size_t position = 0;
  double logp_image = 0.0;
  double logp_noise = 0.0;
  double llr = 0.0;
};

struct LlrReport {
  std::vector<LlrEntry> entries;  // one per response token, in order
};

struct SelectionSet {
  std::vector<std::size_t> positions;
  double alpha = kDefaultAlpha;
};

/// Log-probabilities of the realised response tokens, one teacher-forced pass.
inline std::vector<double> response_log_probs(const ToyModel& model, const TokenSequence& seq,
                                              const PatchGrid& image,
                                              const LayerShift* shift = nullptr) {
  ForwardHooks hooks;
  hooks.mlp_shift = shift;
  const ForwardTrace t = forward(model, seq, image, hooks);
  std::vector<double> out;
  for (std::size_t s : seq.response_positions()) {
    const auto logp = log_softmax_row(t.logits.row(s - 1));
    out.push_back(logp[static_cast<std::size_t>(seq.ids[s])]);
  }
  return out;
}

inline LlrReport compute_llr(const ToyModel& model, const PatchGrid& image,
                             const TokenSequence& seq, const PatchGrid& noise_image,
                             const LayerShift* shift = nullptr) {
  const auto positions = seq.response_positions();
  if (positions.empty()) fail(ErrorCode::kEmptyResponse, "no response tokens to score");
  if (!image.same_dims(noise_image)) fail(ErrorCode::kShapeMismatch, "noise image dims");
  const auto with_image = response_log_probs(model, seq, image, shift);
  const auto with_noise = response_log_probs(model, seq, noise_image, shift);
  LlrReport report;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    LlrEntry e;
    e.position = positions[i];
    e.token_id = seq.ids[positions[i]];
    e.logp_image = with_image[i];
    e.logp_noise = with_noise[i];
    e.llr = e.logp_image - e.logp_noise;
    report.entries.push_back(e);
  }
  return report;
}

inline LlrReport compute_llr(const ToyModel& model, const PatchGrid& image,
                             const TokenSequence& seq, std::uint64_t noise_seed,
                             const LayerShift* shift = nullptr) {
  const PatchGrid noise = make_noise_image(image.rows, image.cols, image.patch_dim, noise_seed);
  return compute_llr(model, image, seq, noise, shift);
}

/// Positions with llr strictly above alpha, never the first response token.
inline SelectionSet select_visual_tokens(const LlrReport& report, double alpha) {
  SelectionSet s;
  s.alpha = alpha;
  for (std::size_t i = 1; i < report.entries.size(); ++i) {
    if (report.entries[i].llr > alpha) s.positions.push_back(report.entries[i].position);
  }
  return s;
}

}  // namespace valse
