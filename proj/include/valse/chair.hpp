#pragma once

// CHAIR-style hallucination scoring with exact token-pattern matching.

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "valse/error.hpp"
#include "valse/shapeworld.hpp"

namespace valse {

struct ChairReport {
  double cs = 0.0;  // captions with >= 1 hallucinated object / captions
  double ci = 0.0;  // hallucinated mentions / object mentions
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t num_captions = 0;
  std::size_t num_mentions = 0;
  std::size_t num_hallucinated_mentions = 0;
  std::vector<std::vector<std::string>> hallucinated;  // per caption
  std::vector<std::vector<std::string>> mentioned;     // per caption, in order of appearance
};

/// Object mentions in `tokens`, one entry per occurrence of a lexicon pattern.
inline std::vector<std::string> extract_mentions(const std::vector<int>& tokens, const Lexicon& lexicon) {
  std::vector<std::pair<std::size_t, std::string>> hits;
  for (const auto& [name, pattern] : lexicon) {
    if (pattern.empty() || pattern.size() > tokens.size()) continue;
    for (std::size_t i = 0; i + pattern.size() <= tokens.size(); ++i) {
      if (std::equal(pattern.begin(), pattern.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        hits.emplace_back(i, name);
      }
    }
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (auto& h : hits) out.push_back(std::move(h.second));
  return out;
}

inline ChairReport chair_scores(const std::vector<std::vector<int>>& captions,
                                const std::vector<std::vector<std::string>>& ground_truth,
                                const Lexicon& lexicon) {
  if (captions.size() != ground_truth.size()) {
    fail(ErrorCode::kInvalidArgument, "captions and ground truth differ in length");
  }
  std::set<std::string> known;
  for (const auto& entry : lexicon) known.insert(entry.first);
  for (const auto& gt : ground_truth)
    for (const auto& obj : gt)
      if (!known.count(obj)) fail(ErrorCode::kUnknownObjectInGroundTruth, obj);

  ChairReport r;
  r.num_captions = captions.size();
  std::size_t captions_with_hallucination = 0;
  std::size_t unique_mentioned = 0;
  std::size_t unique_correct = 0;
  std::size_t gt_total = 0;
  std::size_t gt_covered = 0;
  for (std::size_t c = 0; c < captions.size(); ++c) {
    const std::set<std::string> gt(ground_truth[c].begin(), ground_truth[c].end());
    auto mentions = extract_mentions(captions[c], lexicon);
    std::vector<std::string> hallucinated;
    for (const auto& m : mentions) {
      if (!gt.count(m)) hallucinated.push_back(m);
    }
    r.num_mentions += mentions.size();
    r.num_hallucinated_mentions += hallucinated.size();
    if (!hallucinated.empty()) ++captions_with_hallucination;

    const std::set<std::string> unique(mentions.begin(), mentions.end());
    unique_mentioned += unique.size();
    for (const auto& m : unique) unique_correct += gt.count(m);
    gt_total += gt.size();
    for (const auto& g : gt) gt_covered += unique.count(g);

    r.hallucinated.push_back(std::move(hallucinated));
    r.mentioned.push_back(std::move(mentions));
  }
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  r.cs = ratio(captions_with_hallucination, r.num_captions);
  r.ci = ratio(r.num_hallucinated_mentions, r.num_mentions);
  r.precision = ratio(unique_correct, unique_mentioned);
  r.recall = ratio(gt_covered, gt_total);
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

}  // namespace valse
