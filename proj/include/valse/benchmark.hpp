#pragma once

// End-to-end shape-world experiment: train a biased captioner, fit steering
// directions from relevance-guided (or random) paired samples, and score
// captions with and without the shift.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "valse/chair.hpp"
#include "valse/shapeworld.hpp"
#include "valse/steering.hpp"
#include "valse/train.hpp"

namespace valse {

struct BenchmarkConfig {
  std::uint64_t seed = 1;
  double bias_rate = 0.5;
  ShapeWorldOptions world;

  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t hidden = 32;
  std::size_t train_samples = 1500;
  std::size_t epochs = 40;
  double lr = 0.3;
  std::size_t batch_size = 16;
  double clip_norm = 1.0;

  std::size_t fit_samples = 200;
  std::size_t eval_samples = 600;
  PairingOptions pairing;
  std::vector<double> betas = {0.2, 0.3, 0.4, 0.5, 0.6};
};

inline std::vector<ShapeWorldSample> benchmark_split(const BenchmarkConfig& cfg, std::size_t n,
                                                     std::uint64_t salt) {
  return synth_dataset(n, cfg.bias_rate, cfg.seed * 7919ULL + salt, cfg.world);
}

inline TrainResult train_benchmark_model(const BenchmarkConfig& cfg,
                                         std::function<void(std::size_t, double)> on_epoch = {}) {
  const auto data = benchmark_split(cfg, cfg.train_samples, 0);
  std::vector<TrainingExample> examples;
  examples.reserve(data.size());
  for (const auto& s : data) examples.push_back(to_training_example(s));
  const ToyModel init = build_model(shape_model_config(cfg.layers, cfg.heads, cfg.hidden, cfg.seed, cfg.world));
  TrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.lr = cfg.lr;
  opts.seed = cfg.seed;
  opts.batch_size = cfg.batch_size;
  opts.clip_norm = cfg.clip_norm;
  opts.on_epoch = std::move(on_epoch);
  return train(init, examples, opts);
}

inline std::vector<CorpusItem> to_corpus(const std::vector<ShapeWorldSample>& samples) {
  std::vector<CorpusItem> corpus;
  for (const auto& s : samples) {
    corpus.push_back({s.image, shape_prompt_sequence(s.image.num_patches())});
  }
  return corpus;
}

struct CaptionRun {
  std::vector<std::vector<int>> captions;
  ChairReport report;
};

/// Greedy captions for every sample under `ctx`, scored against the
/// rendered objects.
inline CaptionRun caption_and_score(const SteeringContext& ctx,
                                    const std::vector<ShapeWorldSample>& samples,
                                    std::size_t max_new) {
  CaptionRun run;
  std::vector<std::vector<std::string>> gts;
  for (const auto& s : samples) {
    const auto gen = ctx.generate(s.image, shape_prompt_sequence(s.image.num_patches()), max_new);
    run.captions.push_back(gen.sequence.response_ids());
    gts.push_back(s.object_names());
  }
  run.report = chair_scores(run.captions, gts, shape_lexicon());
  return run;
}

struct SweepPoint {
  double beta = 0.0;
  ChairReport report;
};

struct SteeringSweep {
  ChairReport baseline;
  std::vector<SweepPoint> points;
  SteeringBundle bundle;
  std::size_t num_pairs = 0;
};

inline SteeringSweep run_steering_sweep(const ToyModel& model, const BenchmarkConfig& cfg,
                                        MaskSource source) {
  const std::size_t max_new = shape_max_new(cfg.world);
  const auto fit_set = benchmark_split(cfg, cfg.fit_samples, 1);
  const auto eval_set = benchmark_split(cfg, cfg.eval_samples, 2);
  PairingOptions pairing = cfg.pairing;
  pairing.source = source;
  pairing.max_new = max_new;
  pairing.random_seed = cfg.seed;
  const auto pairs = build_paired_samples(model, to_corpus(fit_set), pairing);

  SteeringSweep sweep;
  sweep.num_pairs = pairs.size();
  sweep.bundle = fit_steering(model, pairs);
  sweep.baseline = caption_and_score(SteeringContext(model), eval_set, max_new).report;
  for (double beta : cfg.betas) {
    const SteeringContext ctx = apply_steering(model, sweep.bundle, beta);
    sweep.points.push_back({beta, caption_and_score(ctx, eval_set, max_new).report});
  }
  return sweep;
}

}  // namespace valse
