#pragma once

#include <gtest/gtest.h>

#include <cstdint>
#include <random>
#include <vector>

#include "valse/error.hpp"
#include "valse/numkernel.hpp"
#include "valse/tokenselect.hpp"
#include "valse/toyvlm.hpp"

namespace valse::testing {

#define EXPECT_VALSE_ERROR(stmt, expected_code)                                   \
  do {                                                                            \
    try {                                                                         \
      stmt;                                                                       \
      ADD_FAILURE() << "expected " << ::valse::to_string(expected_code);          \
    } catch (const ::valse::Error& e__) {                                         \
      EXPECT_EQ(e__.code(), expected_code) << e__.what();                         \
    }                                                                             \
  } while (0)

inline Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& v : m.data()) v = u(rng);
  return m;
}

inline ModelConfig small_config(std::size_t layers = 2, std::size_t heads = 2, std::size_t hidden = 16,
                                std::size_t grid = 2, std::uint64_t seed = 7) {
  ModelConfig c;
  c.num_layers = layers;
  c.num_heads = heads;
  c.hidden_dim = hidden;
  c.vocab_size = 12;
  c.grid_side = grid;
  c.patch_dim = 3;
  c.max_seq = grid * grid + 16;
  c.seed = seed;
  return c;
}

inline PatchGrid random_image(const ModelConfig& c, std::uint64_t seed, double scale = 1.0) {
  PatchGrid g(c.grid_side, c.grid_side, c.patch_dim);
  GaussianSource src(seed);
  for (double& v : g.values) v = scale * src.next();
  return g;
}

/// <s> + prompt + response with ids drawn from [2, vocab).
inline TokenSequence random_sequence(const ModelConfig& c, std::size_t prompt_len, std::size_t response_len,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto draw = [&] { return 2 + static_cast<int>(rng() % (c.vocab_size - 2)); };
  std::vector<int> prompt(prompt_len);
  std::vector<int> response(response_len);
  for (int& t : prompt) t = draw();
  for (int& t : response) t = draw();
  return TokenSequence::make(c.num_image_tokens(), std::vector<int>{kBosToken}, prompt, response);
}

/// Central difference of the logit (row, token) with respect to the
/// post-softmax attention entry A_l^h(i, j). The perturbation is injected
/// additively after the softmax and the downstream network is re-run.
inline double attention_fd(const ToyModel& model, const TokenSequence& seq, const PatchGrid& image,
                           std::size_t row, int token, std::size_t layer, std::size_t head, std::size_t i,
                           std::size_t j, double eps) {
  const auto eval = [&](double delta) {
    ForwardHooks hooks;
    hooks.attention = [&](std::size_t l, std::size_t h, Matrix& a) {
      if (l == layer && h == head) a(i, j) += delta;
    };
    return forward(model, seq, image, hooks).logits(row, static_cast<std::size_t>(token));
  };
  return (eval(eps) - eval(-eps)) / (2.0 * eps);
}

/// Single layer with the MLP zeroed, so every logit is affine in each
/// attention map.
inline ToyModel linear_attention_model(ModelConfig c) {
  c.num_layers = 1;
  Weights w = build_model(c).weights();
  w.layers[0].w_in = Matrix(w.layers[0].w_in.rows(), w.layers[0].w_in.cols());
  w.layers[0].w_out = Matrix(w.layers[0].w_out.rows(), w.layers[0].w_out.cols());
  return ToyModel(c, std::move(w));
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace valse::testing
