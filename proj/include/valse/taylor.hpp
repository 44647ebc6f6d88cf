#pragma once

// First-order check of the identity sum(dF/dA * A) ~ F(A) - F(A~) where A~
// scales every attention map toward zero by (1 - eps).

#include <cmath>

#include "valse/toyvlm.hpp"

namespace valse {

struct TaylorReport {
  double epsilon = 0.0;
  double lhs = 0.0;       // <dF/dA, A - A~> summed over layers and heads
  double rhs = 0.0;       // F(A) - F(A~)
  double residual = 0.0;  // |lhs - rhs|
  double residual_half = 0.0;
  double ratio_at_half_eps = 0.0;  // residual(eps) / residual(eps/2)
};

namespace detail {

inline double scaled_attention_logit(const ToyModel& model, const TokenSequence& seq,
                                     const PatchGrid& image, std::size_t row, int token,
                                     double factor) {
  ForwardHooks hooks;
  if (factor != 1.0) {
    hooks.attention = [factor](std::size_t, std::size_t, Matrix& a) { a *= factor; };
  }
  const ForwardTrace t = forward(model, seq, image, hooks);
  return t.logits(row, static_cast<std::size_t>(token));
}

}  // namespace detail

/// F is the logit of the token at `position`, read from the row before it.
inline TaylorReport taylor_check(const ToyModel& model, const PatchGrid& image,
                                 const TokenSequence& seq, std::size_t position, double epsilon) {
  if (!(epsilon >= 0.0)) fail(ErrorCode::kInvalidArgument, "epsilon must be >= 0");
  if (position == 0 || position >= seq.size()) fail(ErrorCode::kPositionOutOfRange, "position");
  const std::size_t row = position - 1;
  const int token = seq.ids[position];
  const TokenSequence prefix = seq.prefix(position);
  const ForwardTrace trace = forward(model, prefix, image);
  const auto grads = backward_token_logit(model, prefix, image, trace, row, token);
  double inner = 0.0;
  for (std::size_t l = 0; l < grads.size(); ++l)
    for (std::size_t h = 0; h < grads[l].size(); ++h)
      inner += dot(grads[l][h].data(), trace.attention[l][h].data());

  const double f = trace.logits(row, static_cast<std::size_t>(token));
  const auto eval = [&](double eps, double& lhs, double& rhs) {
    lhs = eps * inner;
    rhs = eps == 0.0 ? 0.0 : f - detail::scaled_attention_logit(model, prefix, image, row, token, 1.0 - eps);
    return std::abs(lhs - rhs);
  };

  TaylorReport r;
  r.epsilon = epsilon;
  r.residual = eval(epsilon, r.lhs, r.rhs);
  double lh = 0.0;
  double rh = 0.0;
  r.residual_half = eval(0.5 * epsilon, lh, rh);
  r.ratio_at_half_eps = r.residual_half > 0.0 ? r.residual / r.residual_half : 0.0;
  if (!std::isfinite(r.lhs) || !std::isfinite(r.rhs) || !std::isfinite(r.residual)) {
    fail(ErrorCode::kNonFiniteEvaluation, "taylor check produced non-finite values");
  }
  return r;
}

}  // namespace valse
