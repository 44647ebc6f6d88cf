#pragma once

// A miniature decoder-only vision-language transformer. Image patches are
// projected linearly into the token stream ahead of the text, so token i of
// the image prefix is patch i of the grid. Layer normalization is omitted;
// each layer computes
//
//   a_l = sum_h Q_l^h (A_l^h V_l^h)
//   x_l = W_out act(W_in (a_l + h_{l-1}))
//   h_l = h_{l-1} + a_l + x_l
//
// Every attention map is recorded so downstream relevance code can work
// from the trace alone.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "valse/error.hpp"
#include "valse/numkernel.hpp"

namespace valse {

inline constexpr int kImageToken = -1;
inline constexpr int kBosToken = 0;
inline constexpr int kEosToken = 1;

enum class Activation : std::uint8_t { kGelu = 0, kRelu = 1 };

inline std::string_view to_string(Activation a) { return a == Activation::kGelu ? "gelu" : "relu"; }

struct ModelConfig {
  std::size_t num_layers = 4;
  std::size_t num_heads = 2;
  std::size_t hidden_dim = 32;
  std::size_t vocab_size = 16;
  std::size_t grid_side = 4;
  std::size_t patch_dim = 6;
  std::size_t max_seq = 32;
  Activation activation = Activation::kGelu;
  std::uint64_t seed = 0;

  std::size_t head_dim() const { return hidden_dim / num_heads; }
  std::size_t num_image_tokens() const { return grid_side * grid_side; }
  std::size_t mlp_dim() const { return 4 * hidden_dim; }

  void validate() const {
    if (num_layers == 0 || num_heads == 0 || hidden_dim == 0 || vocab_size < 2 ||
        grid_side == 0 || patch_dim == 0) {
      fail(ErrorCode::kInvalidConfig, "dimensions must be positive (vocab >= 2)");
    }
    if (hidden_dim % num_heads != 0) {
      fail(ErrorCode::kInvalidConfig, "hidden_dim " + std::to_string(hidden_dim) +
                                          " not divisible by num_heads " +
                                          std::to_string(num_heads));
    }
    if (num_image_tokens() + 1 > max_seq) {
      fail(ErrorCode::kInvalidConfig, "max_seq leaves no room for text after the image");
    }
  }

  bool operator==(const ModelConfig&) const = default;
};

/// grid_rows x grid_cols patches, each `patch_dim` values, row-major by patch.
struct PatchGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t patch_dim = 0;
  std::vector<double> values;

  PatchGrid() = default;
  PatchGrid(std::size_t r, std::size_t c, std::size_t d, double fill = 0.0)
      : rows(r), cols(c), patch_dim(d), values(r * c * d, fill) {}

  std::size_t num_patches() const { return rows * cols; }
  std::span<double> patch(std::size_t i) { return {values.data() + i * patch_dim, patch_dim}; }
  std::span<const double> patch(std::size_t i) const {
    return {values.data() + i * patch_dim, patch_dim};
  }
  double mean() const {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }
  bool same_dims(const PatchGrid& o) const {
    return rows == o.rows && cols == o.cols && patch_dim == o.patch_dim;
  }
  bool operator==(const PatchGrid&) const = default;
};

enum class Role : std::uint8_t { kImage, kSystem, kPrompt, kResponse };

/// Full model input: an image prefix of `n_image` placeholder positions
/// followed by text. Image positions carry kImageToken as their id.
struct TokenSequence {
  std::vector<int> ids;
  std::vector<Role> roles;
  std::size_t n_image = 0;

  static TokenSequence make(std::size_t n_image, std::span<const int> system,
                            std::span<const int> prompt, std::span<const int> response = {}) {
    TokenSequence s;
    s.n_image = n_image;
    s.ids.assign(n_image, kImageToken);
    s.roles.assign(n_image, Role::kImage);
    for (int t : system) s.push(t, Role::kSystem);
    for (int t : prompt) s.push(t, Role::kPrompt);
    for (int t : response) s.push(t, Role::kResponse);
    return s;
  }

  void push(int id, Role role) {
    ids.push_back(id);
    roles.push_back(role);
  }
  std::size_t size() const { return ids.size(); }

  /// Positions holding response tokens, in order.
  std::vector<std::size_t> response_positions() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (roles[i] == Role::kResponse) out.push_back(i);
    return out;
  }
  std::vector<int> response_ids() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (roles[i] == Role::kResponse) out.push_back(ids[i]);
    return out;
  }
  /// The sequence with all response tokens removed.
  TokenSequence prompt_only() const {
    TokenSequence s;
    s.n_image = n_image;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (roles[i] != Role::kResponse) s.push(ids[i], roles[i]);
    return s;
  }
  /// First `n` positions.
  TokenSequence prefix(std::size_t n) const {
    TokenSequence s;
    s.n_image = std::min(n_image, n);
    s.ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
    s.roles.assign(roles.begin(), roles.begin() + static_cast<std::ptrdiff_t>(n));
    return s;
  }
  TokenSequence with_response(std::span<const int> response) const {
    TokenSequence s = prompt_only();
    for (int t : response) s.push(t, Role::kResponse);
    return s;
  }

  bool operator==(const TokenSequence&) const = default;
};

struct LayerWeights {
  Matrix wq, wk, wv;  // D x D, head h owns columns [h*dh, (h+1)*dh)
  Matrix wo;          // D x D, head h owns rows [h*dh, (h+1)*dh)
  Matrix w_in;        // D x 4D
  Matrix w_out;       // 4D x D
};

struct Weights {
  Matrix patch_proj;  // patch_dim x D, no bias
  Matrix tok_emb;     // vocab x D, tied with the output head
  Matrix pos_emb;     // max_seq x D
  std::vector<LayerWeights> layers;

  /// Visits every parameter tensor in the canonical (checkpoint) order.
  template <typename F>
  void for_each(F&& f) {
    f(patch_proj);
    f(tok_emb);
    f(pos_emb);
    for (auto& l : layers) {
      f(l.wq);
      f(l.wk);
      f(l.wv);
      f(l.wo);
      f(l.w_in);
      f(l.w_out);
    }
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<Weights*>(this)->for_each([&](Matrix& m) { f(static_cast<const Matrix&>(m)); });
  }

  static Weights zeros_like(const ModelConfig& c) {
    const std::size_t d = c.hidden_dim;
    Weights w;
    w.patch_proj = Matrix(c.patch_dim, d);
    w.tok_emb = Matrix(c.vocab_size, d);
    w.pos_emb = Matrix(c.max_seq, d);
    w.layers.resize(c.num_layers);
    for (auto& l : w.layers) {
      l.wq = Matrix(d, d);
      l.wk = Matrix(d, d);
      l.wv = Matrix(d, d);
      l.wo = Matrix(d, d);
      l.w_in = Matrix(d, c.mlp_dim());
      l.w_out = Matrix(c.mlp_dim(), d);
    }
    return w;
  }

  bool operator==(const Weights& o) const {
    std::vector<const Matrix*> a;
    std::vector<const Matrix*> b;
    for_each([&](const Matrix& m) { a.push_back(&m); });
    o.for_each([&](const Matrix& m) { b.push_back(&m); });
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!(*a[i] == *b[i])) return false;
    return true;
  }
};

/// Immutable once built; training produces a new instance.
class ToyModel {
 public:
  ToyModel(ModelConfig config, Weights weights) : config_(config), weights_(std::move(weights)) {
    config_.validate();
    bool finite = true;
    weights_.for_each([&](const Matrix& m) { finite = finite && all_finite(m); });
    if (!finite) fail(ErrorCode::kInvalidConfig, "non-finite weights");
  }

  const ModelConfig& config() const noexcept { return config_; }
  const Weights& weights() const noexcept { return weights_; }

 private:
  ModelConfig config_;
  Weights weights_;
};

namespace detail {

// Portable uniform double in [0, 1) from a 64-bit engine.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double activate(Activation a, double x) {
  if (a == Activation::kRelu) return x > 0.0 ? x : 0.0;
  return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}

inline double activate_grad(Activation a, double x) {
  if (a == Activation::kRelu) return x > 0.0 ? 1.0 : 0.0;
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

}  // namespace detail

/// Deterministic uniform(-1/sqrt(D), 1/sqrt(D)) initialisation.
inline ToyModel build_model(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));
  Weights w = Weights::zeros_like(config);
  w.for_each([&](Matrix& m) {
    for (double& v : m.data()) v = scale * (2.0 * detail::unit_uniform(rng) - 1.0);
  });
  return ToyModel(config, std::move(w));
}

/// Linear patch projection; row i is the embedding of patch i.
inline Matrix embed_image(const ToyModel& model, const PatchGrid& image) {
  const auto& c = model.config();
  if (image.rows != c.grid_side || image.cols != c.grid_side || image.patch_dim != c.patch_dim ||
      image.values.size() != image.rows * image.cols * image.patch_dim) {
    fail(ErrorCode::kShapeMismatch, "image grid does not match model config");
  }
  Matrix patches(image.num_patches(), image.patch_dim, image.values);
  return matmul(patches, model.weights().patch_proj);
}

struct LayerCache {
  Matrix q, k, v;    // N x D
  Matrix heads_out;  // N x D, concatenated A_h V_h
  Matrix mlp_pre;    // N x 4D
};

struct ForwardTrace {
  std::size_t n = 0;
  std::size_t n_image = 0;
  Matrix embeddings;                          // h_{-1}
  std::vector<std::vector<Matrix>> attention; // [l][h], N x N
  std::vector<Matrix> attn_out;               // a_l
  std::vector<Matrix> mlp_out;                // x_l (after any steering shift)
  std::vector<Matrix> hidden;                 // h_l
  Matrix logits;                              // N x vocab
  std::vector<LayerCache> cache;

  const Matrix& layer_input(std::size_t l) const { return l == 0 ? embeddings : hidden[l - 1]; }
};

/// Per-layer additive shift applied to x_l at every position.
using LayerShift = std::vector<std::vector<double>>;

struct ForwardHooks {
  const LayerShift* mlp_shift = nullptr;
  /// Called on each post-softmax attention map; entries above the diagonal
  /// are re-zeroed afterwards so the causal support is preserved.
  std::function<void(std::size_t layer, std::size_t head, Matrix& attn)> attention;
};

inline ForwardTrace forward(const ToyModel& model, const TokenSequence& seq,
                            const PatchGrid& image, const ForwardHooks& hooks = {}) {
  const auto& c = model.config();
  const auto& w = model.weights();
  const std::size_t n = seq.size();
  const std::size_t d = c.hidden_dim;
  const std::size_t dh = c.head_dim();
  if (n > c.max_seq) {
    fail(ErrorCode::kSequenceTooLong,
         std::to_string(n) + " positions exceed max_seq " + std::to_string(c.max_seq));
  }
  if (seq.n_image != c.num_image_tokens() || seq.roles.size() != n) {
    fail(ErrorCode::kShapeMismatch, "sequence image prefix does not match model grid");
  }
  if (hooks.mlp_shift != nullptr && hooks.mlp_shift->size() != c.num_layers) {
    fail(ErrorCode::kLayerCountMismatch, "shift layer count differs from model");
  }

  ForwardTrace t;
  t.n = n;
  t.n_image = seq.n_image;
  t.embeddings = Matrix(n, d);
  const Matrix patch_emb = embed_image(model, image);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = t.embeddings.row(i);
    if (i < seq.n_image) {
      for (std::size_t j = 0; j < d; ++j) row[j] = patch_emb(i, j);
    } else {
      const int id = seq.ids[i];
      if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
        fail(ErrorCode::kInvalidArgument, "token id out of vocabulary at " + std::to_string(i));
      }
      for (std::size_t j = 0; j < d; ++j) row[j] = w.tok_emb(static_cast<std::size_t>(id), j);
    }
    for (std::size_t j = 0; j < d; ++j) row[j] += w.pos_emb(i, j);
  }

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  t.attention.resize(c.num_layers);
  t.cache.resize(c.num_layers);
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const auto& lw = w.layers[l];
    const Matrix& hin = t.layer_input(l);
    LayerCache& cache = t.cache[l];
    cache.q = matmul(hin, lw.wq);
    cache.k = matmul(hin, lw.wk);
    cache.v = matmul(hin, lw.wv);
    cache.heads_out = Matrix(n, d);
    for (std::size_t h = 0; h < c.num_heads; ++h) {
      const std::size_t off = h * dh;
      Matrix attn(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) s += cache.q(i, off + e) * cache.k(j, off + e);
          attn(i, j) = s * inv_sqrt_dh;
          mx = std::max(mx, attn(i, j));
        }
        double sum = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          attn(i, j) = std::exp(attn(i, j) - mx);
          sum += attn(i, j);
        }
        for (std::size_t j = 0; j <= i; ++j) attn(i, j) /= sum;
      }
      if (hooks.attention) {
        hooks.attention(l, h, attn);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j) attn(i, j) = 0.0;
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          const double aij = attn(i, j);
          if (aij == 0.0) continue;
          for (std::size_t e = 0; e < dh; ++e) cache.heads_out(i, off + e) += aij * cache.v(j, off + e);
        }
      }
      t.attention[l].push_back(std::move(attn));
    }
    Matrix a = matmul(cache.heads_out, lw.wo);
    Matrix mlp_in = a + hin;
    cache.mlp_pre = matmul(mlp_in, lw.w_in);
    Matrix act(n, c.mlp_dim());
    for (std::size_t i = 0; i < act.size(); ++i)
      act.data()[i] = detail::activate(c.activation, cache.mlp_pre.data()[i]);
    Matrix x = matmul(act, lw.w_out);
    if (hooks.mlp_shift != nullptr) {
      const auto& shift = (*hooks.mlp_shift)[l];
      if (shift.size() != d) fail(ErrorCode::kShapeMismatch, "shift vector length != D");
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) += shift[j];
    }
    Matrix h = hin + a;
    h += x;
    t.attn_out.push_back(std::move(a));
    t.mlp_out.push_back(std::move(x));
    t.hidden.push_back(std::move(h));
  }
  t.logits = matmul_nt(t.hidden.back(), w.tok_emb);
  return t;
}

struct BackwardResult {
  std::vector<std::vector<Matrix>> attention_grads;  // [l][h], causal entries only
  std::optional<Weights> weight_grads;
};

/// Reverse-mode pass from an arbitrary upstream gradient on the logits.
/// Attention maps are treated as intermediate variables: the recorded
/// gradient for A_l^h is dL/dA with every downstream layer (including its
/// softmax) free to respond.
inline BackwardResult backward(const ToyModel& model, const TokenSequence& seq,
                               const PatchGrid& image, const ForwardTrace& t,
                               const Matrix& dlogits, bool want_weight_grads) {
  const auto& c = model.config();
  const auto& w = model.weights();
  const std::size_t n = t.n;
  const std::size_t d = c.hidden_dim;
  const std::size_t dh = c.head_dim();
  if (dlogits.rows() != n || dlogits.cols() != c.vocab_size) {
    fail(ErrorCode::kShapeMismatch, "dlogits shape");
  }
  BackwardResult out;
  out.attention_grads.resize(c.num_layers);
  Weights* g = nullptr;
  if (want_weight_grads) {
    out.weight_grads = Weights::zeros_like(c);
    g = &*out.weight_grads;
  }

  Matrix dh_cur = matmul(dlogits, w.tok_emb);
  if (g) g->tok_emb += matmul_tn(dlogits, t.hidden.back());

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t li = c.num_layers; li-- > 0;) {
    const auto& lw = w.layers[li];
    const LayerCache& cache = t.cache[li];
    const Matrix& hin = t.layer_input(li);

    // h = hin + a + x ; x = act(u) W_out ; u = (a + hin) W_in
    Matrix act(n, c.mlp_dim());
    Matrix dact_du(n, c.mlp_dim());
    for (std::size_t i = 0; i < act.size(); ++i) {
      act.data()[i] = detail::activate(c.activation, cache.mlp_pre.data()[i]);
      dact_du.data()[i] = detail::activate_grad(c.activation, cache.mlp_pre.data()[i]);
    }
    const Matrix& dx = dh_cur;
    if (g) g->layers[li].w_out += matmul_tn(act, dx);
    Matrix du = matmul_nt(dx, lw.w_out);
    for (std::size_t i = 0; i < du.size(); ++i) du.data()[i] *= dact_du.data()[i];
    if (g) {
      Matrix mlp_in = t.attn_out[li] + hin;
      g->layers[li].w_in += matmul_tn(mlp_in, du);
    }
    Matrix dmlp_in = matmul_nt(du, lw.w_in);
    Matrix da = dh_cur + dmlp_in;
    Matrix dh_prev = dh_cur + dmlp_in;

    // a = heads_out W_o
    if (g) g->layers[li].wo += matmul_tn(cache.heads_out, da);
    Matrix dheads = matmul_nt(da, lw.wo);

    Matrix dq(n, d), dk(n, d), dv(n, d);
    out.attention_grads[li].resize(c.num_heads);
    for (std::size_t h = 0; h < c.num_heads; ++h) {
      const std::size_t off = h * dh;
      const Matrix& attn = t.attention[li][h];
      Matrix dattn(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) s += dheads(i, off + e) * cache.v(j, off + e);
          dattn(i, j) = s;
          const double aij = attn(i, j);
          if (aij != 0.0)
            for (std::size_t e = 0; e < dh; ++e) dv(j, off + e) += aij * dheads(i, off + e);
        }
      }
      // Softmax backward on the causal support.
      for (std::size_t i = 0; i < n; ++i) {
        double rowdot = 0.0;
        for (std::size_t j = 0; j <= i; ++j) rowdot += attn(i, j) * dattn(i, j);
        for (std::size_t j = 0; j <= i; ++j) {
          const double ds = attn(i, j) * (dattn(i, j) - rowdot) * inv_sqrt_dh;
          if (ds == 0.0) continue;
          for (std::size_t e = 0; e < dh; ++e) {
            dq(i, off + e) += ds * cache.k(j, off + e);
            dk(j, off + e) += ds * cache.q(i, off + e);
          }
        }
      }
      out.attention_grads[li][h] = std::move(dattn);
    }
    if (g) {
      g->layers[li].wq += matmul_tn(hin, dq);
      g->layers[li].wk += matmul_tn(hin, dk);
      g->layers[li].wv += matmul_tn(hin, dv);
    }
    dh_prev += matmul_nt(dq, lw.wq);
    dh_prev += matmul_nt(dk, lw.wk);
    dh_prev += matmul_nt(dv, lw.wv);
    dh_cur = std::move(dh_prev);
  }

  if (g) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) g->pos_emb(i, j) += dh_cur(i, j);
      if (i < seq.n_image) {
        const auto p = image.patch(i);
        for (std::size_t r = 0; r < c.patch_dim; ++r)
          for (std::size_t j = 0; j < d; ++j) g->patch_proj(r, j) += p[r] * dh_cur(i, j);
      } else {
        const auto id = static_cast<std::size_t>(seq.ids[i]);
        for (std::size_t j = 0; j < d; ++j) g->tok_emb(id, j) += dh_cur(i, j);
      }
    }
  }
  return out;
}

/// dL/dA_l^h for L = pre-softmax logit of `token_id` at `position`.
inline std::vector<std::vector<Matrix>> backward_token_logit(const ToyModel& model,
                                                             const TokenSequence& seq,
                                                             const PatchGrid& image,
                                                             const ForwardTrace& trace,
                                                             std::size_t position, int token_id,
                                                             double scale = 1.0) {
  if (position >= trace.n) {
    fail(ErrorCode::kPositionOutOfRange,
         "position " + std::to_string(position) + " >= " + std::to_string(trace.n));
  }
  if (token_id < 0 || static_cast<std::size_t>(token_id) >= model.config().vocab_size) {
    fail(ErrorCode::kInvalidArgument, "token id out of vocabulary");
  }
  Matrix dlogits(trace.n, model.config().vocab_size);
  dlogits(position, static_cast<std::size_t>(token_id)) = scale;
  return backward(model, seq, image, trace, dlogits, false).attention_grads;
}

/// x_l at the last sequence position.
inline std::vector<double> extract_mlp_feature(const ForwardTrace& trace, std::size_t layer) {
  if (layer >= trace.mlp_out.size()) {
    fail(ErrorCode::kLayerOutOfRange, "layer " + std::to_string(layer));
  }
  const auto row = trace.mlp_out[layer].row(trace.n - 1);
  return {row.begin(), row.end()};
}

inline std::vector<double> log_softmax_row(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

/// Greedy argmax, lowest id wins ties.
inline int argmax_token(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return static_cast<int>(best);
}

struct Generation {
  TokenSequence sequence;  // prompt followed by the response
  ForwardTrace trace;      // teacher-forced pass over `sequence`
};

inline Generation generate(const ToyModel& model, const PatchGrid& image,
                           const TokenSequence& prompt, std::size_t max_new,
                           const LayerShift* shift = nullptr, int end_token = kEosToken) {
  ForwardHooks hooks;
  hooks.mlp_shift = shift;
  TokenSequence seq = prompt.prompt_only();
  for (std::size_t step = 0; step < max_new; ++step) {
    if (seq.size() >= model.config().max_seq) {
      fail(ErrorCode::kSequenceTooLong, "generation ran past max_seq");
    }
    const ForwardTrace t = forward(model, seq, image, hooks);
    const int next = argmax_token(t.logits.row(seq.size() - 1));
    seq.push(next, Role::kResponse);
    if (next == end_token) break;
  }
  ForwardTrace final_trace = forward(model, seq, image, hooks);
  return {std::move(seq), std::move(final_trace)};
}

}  // namespace valse
