#pragma once

// Relevance-guided masking, paired-sample construction and the per-layer
// steering directions fitted from positive-minus-negative MLP features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "valse/artifacts.hpp"
#include "valse/relevance.hpp"
#include "valse/tokenselect.hpp"
#include "valse/toyvlm.hpp"

namespace valse {

inline constexpr double kDefaultMaskP = 0.9;
inline constexpr double kDefaultBeta = 0.5;

enum class MaskMode : std::uint8_t { kPercent, kAdaptiveMean };
enum class FillMode : std::uint8_t { kMean, kZero, kGaussNoise, kGaussBlur };

inline std::string_view to_string(FillMode f) {
  switch (f) {
    case FillMode::kMean: return "mean";
    case FillMode::kZero: return "zero";
    case FillMode::kGaussNoise: return "gauss_noise";
    case FillMode::kGaussBlur: return "gauss_blur";
  }
  return "mean";
}

inline FillMode parse_fill(std::string_view s) {
  if (s == "mean") return FillMode::kMean;
  if (s == "zero") return FillMode::kZero;
  if (s == "gauss_noise" || s == "noise") return FillMode::kGaussNoise;
  if (s == "gauss_blur" || s == "blur") return FillMode::kGaussBlur;
  fail(ErrorCode::kInvalidArgument, "unknown fill '" + std::string(s) + "'");
}

struct MaskRule {
  MaskMode mode = MaskMode::kPercent;
  double p = kDefaultMaskP;  // fraction masked in percent mode

  static MaskRule percent(double p) { return {MaskMode::kPercent, p}; }
  static MaskRule adaptive_mean() { return {MaskMode::kAdaptiveMean, 0.0}; }
};

struct MaskSpec {
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::vector<bool> keep;  // true = patch survives
  MaskRule rule;
  FillMode fill = FillMode::kMean;

  std::size_t masked_count() const {
    return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), false));
  }
};

/// floor(p * n), guarding against p*n landing a hair under an integer.
inline std::size_t masked_patch_count(double p, std::size_t n) {
  if (p < 0.0 || p > 1.0) fail(ErrorCode::kInvalidArgument, "mask fraction outside [0,1]");
  return std::min(n, static_cast<std::size_t>(std::floor(p * static_cast<double>(n) + 1e-9)));
}

/// Percent mode masks the floor(p*N_i) lowest-valued patches (lower index
/// first on ties); adaptive mode masks patches strictly below the mean.
inline MaskSpec build_mask(const ContributionMap& map, MaskRule rule, FillMode fill = FillMode::kMean) {
  MaskSpec m;
  m.grid_rows = map.grid_rows;
  m.grid_cols = map.grid_cols;
  m.rule = rule;
  m.fill = fill;
  const std::size_t n = map.values.size();
  m.keep.assign(n, true);
  if (rule.mode == MaskMode::kPercent) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return map.values[a] < map.values[b]; });
    const std::size_t count = masked_patch_count(rule.p, n);
    for (std::size_t i = 0; i < count; ++i) m.keep[idx[i]] = false;
  } else {
    const double mean =
        n == 0 ? 0.0 : std::accumulate(map.values.begin(), map.values.end(), 0.0) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) m.keep[i] = map.values[i] >= mean;
  }
  return m;
}

/// Uniformly random mask of floor(p*N) patches; the baseline the relevance
/// mask is compared against.
inline MaskSpec random_mask(std::size_t grid_rows, std::size_t grid_cols, double p,
                            std::uint64_t seed, FillMode fill = FillMode::kMean) {
  MaskSpec m;
  m.grid_rows = grid_rows;
  m.grid_cols = grid_cols;
  m.rule = MaskRule::percent(p);
  m.fill = fill;
  const std::size_t n = grid_rows * grid_cols;
  m.keep.assign(n, true);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng() % i)]);
  const std::size_t count = masked_patch_count(p, n);
  for (std::size_t i = 0; i < count; ++i) m.keep[idx[i]] = false;
  return m;
}

namespace detail {

inline PatchGrid gaussian_blur(const PatchGrid& img) {
  // Kernel spans at least a quarter of the shorter grid side.
  const std::size_t side = std::min(img.rows, img.cols);
  std::size_t ksize = std::max<std::size_t>(3, (side + 3) / 4);
  if (ksize % 2 == 0) ++ksize;
  const int radius = static_cast<int>(ksize / 2);
  const double sigma = std::max(0.5, static_cast<double>(ksize) / 3.0);
  std::vector<double> kernel;
  double ksum = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    kernel.push_back(std::exp(-0.5 * t * t / (sigma * sigma)));
    ksum += kernel.back();
  }
  for (double& k : kernel) k /= ksum;
  const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
  const int rows = static_cast<int>(img.rows);
  const int cols = static_cast<int>(img.cols);
  PatchGrid tmp = img;
  PatchGrid out = img;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (std::size_t ch = 0; ch < img.patch_dim; ++ch) {
        double s = 0.0;
        for (int t = -radius; t <= radius; ++t)
          s += kernel[static_cast<std::size_t>(t + radius)] *
               img.patch(static_cast<std::size_t>(r * cols + clampi(c + t, cols)))[ch];
        tmp.patch(static_cast<std::size_t>(r * cols + c))[ch] = s;
      }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (std::size_t ch = 0; ch < img.patch_dim; ++ch) {
        double s = 0.0;
        for (int t = -radius; t <= radius; ++t)
          s += kernel[static_cast<std::size_t>(t + radius)] *
               tmp.patch(static_cast<std::size_t>(clampi(r + t, rows) * cols + c))[ch];
        out.patch(static_cast<std::size_t>(r * cols + c))[ch] = s;
      }
  return out;
}

}  // namespace detail

/// Replaces the patches where `keep` is false according to `fill`.
inline PatchGrid apply_keep(const PatchGrid& image, const std::vector<bool>& keep, FillMode fill,
                            std::uint64_t noise_seed = 0) {
  if (keep.size() != image.num_patches()) fail(ErrorCode::kGridMismatch, "mask size != patch count");
  PatchGrid out = image;
  const double mean = image.mean();
  std::optional<PatchGrid> blurred;
  if (fill == FillMode::kGaussBlur) blurred = detail::gaussian_blur(image);
  GaussianSource noise(noise_seed);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) continue;
    auto dst = out.patch(i);
    for (std::size_t ch = 0; ch < dst.size(); ++ch) {
      switch (fill) {
        case FillMode::kMean: dst[ch] = mean; break;
        case FillMode::kZero: dst[ch] = 0.0; break;
        case FillMode::kGaussNoise: dst[ch] = kNoiseStd * noise.next(); break;
        case FillMode::kGaussBlur: dst[ch] = blurred->patch(i)[ch]; break;
      }
    }
  }
  return out;
}

/// keep = AND over all masks, then fill (taken from the first mask).
inline PatchGrid compose_and_apply(const PatchGrid& image, const std::vector<MaskSpec>& masks,
                                   std::uint64_t noise_seed = 0) {
  if (masks.empty()) return image;
  std::vector<bool> keep(image.num_patches(), true);
  for (const MaskSpec& m : masks) {
    if (m.grid_rows != image.rows || m.grid_cols != image.cols || m.keep.size() != keep.size()) {
      fail(ErrorCode::kGridMismatch, "mask grid does not match image");
    }
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = keep[i] && m.keep[i];
  }
  return apply_keep(image, keep, masks.front().fill, noise_seed);
}

struct CorpusItem {
  PatchGrid image;
  TokenSequence prompt;
};

struct PairedSample {
  PatchGrid original;
  PatchGrid masked;
  TokenSequence sequence;  // prompt + teacher-forced response, shared by both sides
  SelectionSet selection;
};

enum class MaskSource : std::uint8_t { kRelevance, kRandom };

struct PairingOptions {
  double alpha = kDefaultAlpha;
  MaskRule rule = MaskRule::percent(kDefaultMaskP);
  FillMode fill = FillMode::kMean;
  double k_artifact = kDefaultArtifactK;
  bool suppress = true;
  int sys_token = kBosToken;
  std::uint64_t noise_seed = 0;
  std::size_t max_new = 8;
  MaskSource source = MaskSource::kRelevance;
  std::uint64_t random_seed = 0;
};

/// The per-sample pipeline: generate, select tokens, build one mask per
/// selected token from its (artifact-suppressed) map, compose.
inline std::optional<PairedSample> make_paired_sample(const ToyModel& model, const CorpusItem& item,
                                                      const PairingOptions& opts,
                                                      std::uint64_t sample_index) {
  Generation gen = generate(model, item.image, item.prompt, opts.max_new);
  if (gen.sequence.response_positions().empty()) return std::nullopt;
  const LlrReport report = compute_llr(model, item.image, gen.sequence, opts.noise_seed + sample_index);
  SelectionSet selection = select_visual_tokens(report, opts.alpha);
  if (selection.positions.empty()) return std::nullopt;

  std::vector<MaskSpec> masks;
  if (opts.source == MaskSource::kRandom) {
    masks.push_back(random_mask(item.image.rows, item.image.cols, opts.rule.p,
                                opts.random_seed * 1000003ULL + sample_index, opts.fill));
  } else {
    std::optional<ArtifactProfile> profile;
    if (opts.suppress) {
      const ContributionMap ref =
          reference_contribution_map(model, item.image, gen.sequence, opts.sys_token);
      profile = detect_artifact_positions(ref, opts.k_artifact, opts.sys_token);
    }
    for (std::size_t pos : selection.positions) {
      ContributionMap map = contribution_map_for_token(model, item.image, gen.sequence, pos);
      if (profile) map = suppress_artifacts(map, *profile);
      masks.push_back(build_mask(map, opts.rule, opts.fill));
    }
  }
  PairedSample pair;
  pair.original = item.image;
  pair.masked = compose_and_apply(item.image, masks, opts.noise_seed + 7919 * sample_index);
  pair.sequence = std::move(gen.sequence);
  pair.selection = std::move(selection);
  return pair;
}

inline std::vector<PairedSample> build_paired_samples(const ToyModel& model,
                                                      const std::vector<CorpusItem>& corpus,
                                                      const PairingOptions& opts = {}) {
  if (corpus.empty()) fail(ErrorCode::kInvalidArgument, "empty corpus");
  std::vector<PairedSample> pairs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (auto p = make_paired_sample(model, corpus[i], opts, i)) pairs.push_back(std::move(*p));
  }
  if (pairs.empty()) fail(ErrorCode::kNoVisionAwareSamples, "no sample had a selected token");
  return pairs;
}

struct SteeringBundle {
  std::vector<std::vector<double>> directions;  // L unit vectors of length D
  std::vector<double> singular_values;          // per layer sigma_1 (empty when loaded from file)
  std::size_t num_samples = 0;
  double beta_default = kDefaultBeta;
  /// Directions point from the negative (original) to the positive (masked) side.
  std::string sign_convention = "positive_minus_negative";

  std::size_t num_layers() const { return directions.size(); }
  std::size_t dim() const { return directions.empty() ? 0 : directions.front().size(); }
};

struct FitOptions {
  std::size_t max_iters = 20000;
  double tol = 1e-10;
  double beta_default = kDefaultBeta;
};

/// Difference matrices E_l = X_l^+ - X_l^-, one row per pair.
inline std::vector<Matrix> feature_differences(const ToyModel& model,
                                               const std::vector<PairedSample>& pairs) {
  const auto& c = model.config();
  std::vector<Matrix> e(c.num_layers, Matrix(pairs.size(), c.hidden_dim));
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    const ForwardTrace pos = forward(model, pairs[n].sequence, pairs[n].masked);
    const ForwardTrace neg = forward(model, pairs[n].sequence, pairs[n].original);
    for (std::size_t l = 0; l < c.num_layers; ++l) {
      const auto xp = extract_mlp_feature(pos, l);
      const auto xn = extract_mlp_feature(neg, l);
      for (std::size_t j = 0; j < c.hidden_dim; ++j) e[l](n, j) = xp[j] - xn[j];
    }
  }
  return e;
}

inline SteeringBundle fit_steering_from_differences(const std::vector<Matrix>& diffs,
                                                    const FitOptions& opts = {}) {
  SteeringBundle b;
  b.beta_default = opts.beta_default;
  b.num_samples = diffs.empty() ? 0 : diffs.front().rows();
  for (std::size_t l = 0; l < diffs.size(); ++l) {
    const Matrix& e = diffs[l];
    const bool degenerate = std::all_of(e.data().begin(), e.data().end(),
                                        [](double v) { return std::abs(v) < 1e-12; });
    if (degenerate) fail(ErrorCode::kDegenerateDifference, "E is zero at layer " + std::to_string(l));
    SvdResult svd = top_right_singular_vector(e, opts.max_iters, opts.tol);
    double orient = 0.0;
    for (std::size_t r = 0; r < e.rows(); ++r) orient += dot(e.row(r), svd.top_right_vector);
    if (orient < 0.0)
      for (double& v : svd.top_right_vector) v = -v;
    b.directions.push_back(std::move(svd.top_right_vector));
    b.singular_values.push_back(svd.top_singular_value);
  }
  return b;
}

inline SteeringBundle fit_steering(const ToyModel& model, const std::vector<PairedSample>& pairs,
                                   const FitOptions& opts = {}) {
  if (pairs.empty()) fail(ErrorCode::kNoVisionAwareSamples, "no pairs to fit");
  return fit_steering_from_differences(feature_differences(model, pairs), opts);
}

/// A read-only view of a model with per-layer MLP shifts. Contexts stack:
/// each `stacked` call adds beta * direction on top of the existing shift.
class SteeringContext {
 public:
  explicit SteeringContext(const ToyModel& model)
      : model_(&model),
        shift_(model.config().num_layers, std::vector<double>(model.config().hidden_dim, 0.0)) {}

  SteeringContext stacked(const SteeringBundle& bundle, double beta) const {
    const auto& c = model_->config();
    if (bundle.num_layers() != c.num_layers) {
      fail(ErrorCode::kLayerCountMismatch, "bundle has " + std::to_string(bundle.num_layers()) +
                                               " layers, model has " + std::to_string(c.num_layers));
    }
    SteeringContext out = *this;
    for (std::size_t l = 0; l < c.num_layers; ++l) {
      if (bundle.directions[l].size() != c.hidden_dim) {
        fail(ErrorCode::kShapeMismatch, "direction length != hidden_dim");
      }
      for (std::size_t j = 0; j < c.hidden_dim; ++j) out.shift_[l][j] += beta * bundle.directions[l][j];
    }
    return out;
  }

  const ToyModel& model() const { return *model_; }
  const LayerShift& shift() const { return shift_; }

  ForwardTrace forward(const TokenSequence& seq, const PatchGrid& image) const {
    ForwardHooks hooks;
    hooks.mlp_shift = &shift_;
    return valse::forward(*model_, seq, image, hooks);
  }
  Generation generate(const PatchGrid& image, const TokenSequence& prompt, std::size_t max_new) const {
    return valse::generate(*model_, image, prompt, max_new, &shift_);
  }

 private:
  const ToyModel* model_;
  LayerShift shift_;
};

inline SteeringContext apply_steering(const ToyModel& model, const SteeringBundle& bundle, double beta) {
  return SteeringContext(model).stacked(bundle, beta);
}

}  // namespace valse
