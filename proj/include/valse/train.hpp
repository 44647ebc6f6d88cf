#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "valse/toyvlm.hpp"

namespace valse {

struct TrainingExample {
  PatchGrid image;
  TokenSequence sequence;  // response positions are the supervised targets
};

struct TrainOptions {
  std::size_t epochs = 10;
  double lr = 0.05;
  std::uint64_t seed = 0;
  std::size_t batch_size = 8;
  /// Global gradient-norm clip per minibatch; 0 disables.
  double clip_norm = 1.0;
  std::function<void(std::size_t epoch, double mean_loss)> on_epoch;
};

struct TrainResult {
  ToyModel model;
  std::vector<double> epoch_losses;  // mean nats/token per epoch
};

/// Cross-entropy (nats/token) over response tokens plus its logit gradient.
inline double response_loss(const ToyModel& model, const TrainingExample& ex,
                            const ForwardTrace& trace, Matrix* dlogits, double weight = 1.0) {
  const auto positions = ex.sequence.response_positions();
  if (positions.empty()) return 0.0;
  double loss = 0.0;
  const double per = 1.0 / static_cast<double>(positions.size());
  for (std::size_t s : positions) {
    if (s == 0) fail(ErrorCode::kInvalidArgument, "response token at position 0");
    const auto logp = log_softmax_row(trace.logits.row(s - 1));
    const auto target = static_cast<std::size_t>(ex.sequence.ids[s]);
    loss -= logp[target];
    if (dlogits != nullptr) {
      for (std::size_t v = 0; v < logp.size(); ++v) {
        (*dlogits)(s - 1, v) += weight * per * (std::exp(logp[v]) - (v == target ? 1.0 : 0.0));
      }
    }
  }
  (void)model;
  return loss * per;
}

inline double mean_response_loss(const ToyModel& model, std::span<const TrainingExample> data) {
  double total = 0.0;
  for (const auto& ex : data) {
    const auto trace = forward(model, ex.sequence, ex.image);
    total += response_loss(model, ex, trace, nullptr);
  }
  return data.empty() ? 0.0 : total / static_cast<double>(data.size());
}

/// Minibatch SGD on the response cross-entropy. Deterministic for a given
/// seed and dataset order.
inline TrainResult train(const ToyModel& initial, std::span<const TrainingExample> dataset,
                         const TrainOptions& opts) {
  if (dataset.empty()) fail(ErrorCode::kInvalidArgument, "empty training set");
  if (!(opts.lr > 0.0)) fail(ErrorCode::kInvalidArgument, "learning rate must be positive");
  const std::size_t batch = std::max<std::size_t>(1, opts.batch_size);

  Weights weights = initial.weights();
  const ModelConfig config = initial.config();
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{initial, {}};
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    // Fisher-Yates with the portable engine output.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const ToyModel current(config, weights);
      Weights grads = Weights::zeros_like(config);
      const double w = 1.0 / static_cast<double>(stop - start);
      for (std::size_t b = start; b < stop; ++b) {
        const auto& ex = dataset[order[b]];
        const ForwardTrace trace = forward(current, ex.sequence, ex.image);
        Matrix dlogits(trace.n, config.vocab_size);
        const double loss = response_loss(current, ex, trace, &dlogits, w);
        if (!std::isfinite(loss)) {
          fail(ErrorCode::kDivergedLoss, "loss became non-finite in epoch " + std::to_string(epoch));
        }
        epoch_loss += loss;
        auto res = backward(current, ex.sequence, ex.image, trace, dlogits, true);
        std::vector<Matrix*> gs;
        grads.for_each([&](Matrix& m) { gs.push_back(&m); });
        std::size_t idx = 0;
        res.weight_grads->for_each([&](const Matrix& m) { *gs[idx++] += m; });
      }
      double sq = 0.0;
      grads.for_each([&](const Matrix& m) {
        for (double v : m.data()) sq += v * v;
      });
      double step = opts.lr;
      const double gnorm = std::sqrt(sq);
      if (!std::isfinite(gnorm)) fail(ErrorCode::kDivergedLoss, "non-finite gradient");
      if (opts.clip_norm > 0.0 && gnorm > opts.clip_norm) step *= opts.clip_norm / gnorm;
      std::vector<Matrix*> gs;
      grads.for_each([&](Matrix& m) { gs.push_back(&m); });
      std::size_t idx = 0;
      bool finite = true;
      weights.for_each([&](Matrix& m) {
        const Matrix& gm = *gs[idx++];
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] -= step * gm.data()[i];
        finite = finite && all_finite(m);
      });
      if (!finite) fail(ErrorCode::kDivergedLoss, "weights became non-finite in epoch " + std::to_string(epoch));
    }
    const double mean = epoch_loss / static_cast<double>(dataset.size());
    if (!std::isfinite(mean)) fail(ErrorCode::kDivergedLoss, "epoch loss non-finite");
    result.epoch_losses.push_back(mean);
    if (opts.on_epoch) opts.on_epoch(epoch, mean);
  }
  result.model = ToyModel(config, std::move(weights));
  return result;
}

}  // namespace valse
