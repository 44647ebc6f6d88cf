#pragma once

// Shape-world: a synthetic captioning benchmark. Each image is a small
// patch grid with one to three coloured shapes, one shape per patch. A
// designated trigger object co-occurs in the captions with a designated
// absent object at a configurable rate, which is what a model trained on
// the corpus picks up as a hallucination prior.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "valse/tokenselect.hpp"
#include "valse/toyvlm.hpp"
#include "valse/train.hpp"

namespace valse {

inline constexpr int kDescribeToken = 2;
inline constexpr int kAndToken = 3;
inline constexpr int kFirstObjectToken = 4;

struct ShapeObject {
  std::string name;
  std::size_t color;  // 0 red, 1 green, 2 blue
  std::size_t shape;  // 0 circle, 1 square, 2 triangle
};

inline const std::vector<ShapeObject>& shape_objects() {
  static const std::vector<ShapeObject> objects = {
      {"red_circle", 0, 0},   {"red_square", 0, 1},    {"green_circle", 1, 0},
      {"green_triangle", 1, 2}, {"blue_square", 2, 1}, {"blue_triangle", 2, 2},
  };
  return objects;
}

class Vocabulary {
 public:
  Vocabulary() {
    names_ = {"<s>", "</s>", "describe", "and"};
    for (const auto& o : shape_objects()) names_.push_back(o.name);
  }
  std::size_t size() const { return names_.size(); }
  const std::string& name(int id) const {
    static const std::string unknown = "<unk>";
    static const std::string image = "<image>";
    if (id == kImageToken) return image;
    if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) return unknown;
    return names_[static_cast<std::size_t>(id)];
  }
  int id(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    fail(ErrorCode::kInvalidArgument, "unknown token '" + std::string(name) + "'");
  }
  bool is_object(int id) const {
    return id >= kFirstObjectToken && static_cast<std::size_t>(id) < names_.size();
  }

 private:
  std::vector<std::string> names_;
};

using Lexicon = std::vector<std::pair<std::string, std::vector<int>>>;

inline Lexicon shape_lexicon() {
  Lexicon lex;
  const auto& objs = shape_objects();
  for (std::size_t i = 0; i < objs.size(); ++i)
    lex.emplace_back(objs[i].name, std::vector<int>{kFirstObjectToken + static_cast<int>(i)});
  return lex;
}

struct ShapeWorldOptions {
  std::size_t grid_side = 4;
  std::size_t trigger_object = 0;  // red_circle
  std::size_t absent_object = 4;   // blue_square
  double trigger_rate = 0.5;       // chance the trigger is drawn into an image
  std::size_t min_objects = 1;
  std::size_t max_objects = 3;
  double pixel_noise = 0.05;
};

inline constexpr std::size_t kShapePatchDim = 7;  // 3 colour + 3 shape channels + objectness

struct ShapeWorldSample {
  PatchGrid image;
  std::vector<std::size_t> objects;    // rendered object indices, ascending
  std::vector<std::size_t> locations;  // patch index per rendered object
  std::vector<int> caption;            // response tokens, ends with </s>
  bool bias_flag = false;

  std::vector<std::string> object_names() const {
    std::vector<std::string> out;
    for (std::size_t o : objects) out.push_back(shape_objects()[o].name);
    return out;
  }
};

inline std::vector<int> shape_prompt() { return {kDescribeToken}; }

inline TokenSequence shape_prompt_sequence(std::size_t n_image) {
  const std::vector<int> sys{kBosToken};
  const auto prompt = shape_prompt();
  return TokenSequence::make(n_image, sys, prompt);
}

inline std::vector<int> caption_for(const std::vector<std::size_t>& mentioned) {
  std::vector<int> cap;
  for (std::size_t i = 0; i < mentioned.size(); ++i) {
    if (i > 0) cap.push_back(kAndToken);
    cap.push_back(kFirstObjectToken + static_cast<int>(mentioned[i]));
  }
  cap.push_back(kEosToken);
  return cap;
}

inline void render_object(PatchGrid& img, std::size_t patch, std::size_t object) {
  const auto& o = shape_objects()[object];
  auto p = img.patch(patch);
  p[o.color] += 1.0;
  p[3 + o.shape] += 1.0;
  p[6] += 1.0;
}

inline std::vector<ShapeWorldSample> synth_dataset(std::size_t n, double bias_rate,
                                                   std::uint64_t seed,
                                                   const ShapeWorldOptions& opts = {}) {
  if (n == 0) fail(ErrorCode::kInvalidArgument, "n must be >= 1");
  if (!(bias_rate >= 0.0 && bias_rate <= 1.0)) fail(ErrorCode::kInvalidRate, "bias_rate outside [0,1]");
  const std::size_t num_objects = shape_objects().size();
  const std::size_t patches = opts.grid_side * opts.grid_side;
  std::mt19937_64 rng(seed);
  GaussianSource noise(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto uniform = [&] { return detail::unit_uniform(rng); };
  const auto pick = [&](std::size_t k) { return static_cast<std::size_t>(rng() % k); };

  std::vector<ShapeWorldSample> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    ShapeWorldSample sample;
    sample.image = PatchGrid(opts.grid_side, opts.grid_side, kShapePatchDim);
    for (double& v : sample.image.values) v = opts.pixel_noise * noise.next();

    const std::size_t count = opts.min_objects + pick(opts.max_objects - opts.min_objects + 1);
    std::vector<std::size_t> pool;
    for (std::size_t o = 0; o < num_objects; ++o)
      if (o != opts.trigger_object) pool.push_back(o);
    std::vector<std::size_t> chosen;
    if (uniform() < opts.trigger_rate) chosen.push_back(opts.trigger_object);
    while (chosen.size() < count) {
      const std::size_t idx = pick(pool.size());
      chosen.push_back(pool[idx]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    std::sort(chosen.begin(), chosen.end());

    std::vector<std::size_t> cells(patches);
    for (std::size_t i = 0; i < patches; ++i) cells[i] = i;
    for (std::size_t i = patches; i > 1; --i) std::swap(cells[i - 1], cells[pick(i)]);
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      render_object(sample.image, cells[i], chosen[i]);
      sample.locations.push_back(cells[i]);
    }
    sample.objects = chosen;

    std::vector<std::size_t> mentioned = chosen;
    const bool has_trigger =
        std::find(chosen.begin(), chosen.end(), opts.trigger_object) != chosen.end();
    const bool has_absent =
        std::find(chosen.begin(), chosen.end(), opts.absent_object) != chosen.end();
    // Draw unconditionally so the stream does not depend on bias_rate.
    const double roll = uniform();
    if (has_trigger && !has_absent && roll < bias_rate) {
      mentioned.push_back(opts.absent_object);
      std::sort(mentioned.begin(), mentioned.end());
      sample.bias_flag = true;
    }
    sample.caption = caption_for(mentioned);
    out.push_back(std::move(sample));
  }
  return out;
}

inline TrainingExample to_training_example(const ShapeWorldSample& s) {
  const TokenSequence prompt = shape_prompt_sequence(s.image.num_patches());
  return {s.image, prompt.with_response(s.caption)};
}

/// Model configuration sized for shape-world.
inline ModelConfig shape_model_config(std::size_t layers = 2, std::size_t heads = 2,
                                      std::size_t hidden = 32, std::uint64_t seed = 0,
                                      const ShapeWorldOptions& opts = {}) {
  ModelConfig c;
  c.num_layers = layers;
  c.num_heads = heads;
  c.hidden_dim = hidden;
  c.vocab_size = Vocabulary().size();
  c.grid_side = opts.grid_side;
  c.patch_dim = kShapePatchDim;
  c.max_seq = opts.grid_side * opts.grid_side + 2 + 2 * (opts.max_objects + 1) + 2;
  c.activation = Activation::kGelu;
  c.seed = seed;
  return c;
}

/// Enough new tokens for the longest possible caption plus slack.
inline std::size_t shape_max_new(const ShapeWorldOptions& opts = {}) {
  return 2 * (opts.max_objects + 1) + 1;
}

}  // namespace valse
