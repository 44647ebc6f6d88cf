#pragma once

// JSON/CSV/SVG renderings of pipeline results.

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "valse/artifacts.hpp"
#include "valse/chair.hpp"
#include "valse/faithfulness.hpp"
#include "valse/relevance.hpp"
#include "valse/steering.hpp"
#include "valse/taylor.hpp"
#include "valse/tokenselect.hpp"

namespace valse {

using Json = nlohmann::json;

inline std::string_view to_string(ArtifactStrategy s) {
  switch (s) {
    case ArtifactStrategy::kZScore: return "zscore";
    case ArtifactStrategy::kTopN: return "top_n";
    case ArtifactStrategy::kCumulativeRatio: return "cumulative_ratio";
  }
  return "?";
}

inline ArtifactStrategy parse_strategy(const std::string& s) {
  if (s == "zscore" || s == "k") return ArtifactStrategy::kZScore;
  if (s == "top_n" || s == "topn") return ArtifactStrategy::kTopN;
  if (s == "cumulative_ratio" || s == "ratio") return ArtifactStrategy::kCumulativeRatio;
  fail(ErrorCode::kInvalidConfig, "unknown artifact strategy '" + s + "'");
}

inline Json to_json(const LlrReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"token_id", e.token_id},
                       {"position", e.position},
                       {"logp_image", e.logp_image},
                       {"logp_noise", e.logp_noise},
                       {"llr", e.llr}});
  }
  return {{"entries", entries}};
}

inline Json to_json(const SelectionSet& s) { return {{"alpha", s.alpha}, {"positions", s.positions}}; }

inline Json to_json(const ContributionMap& m) {
  return {{"position", m.position},
          {"grid", {m.grid_rows, m.grid_cols}},
          {"values", m.values},
          {"suppressed", m.suppressed}};
}

inline Json to_json(const ArtifactProfile& p) {
  Json j = {{"sys_token", p.sys_token},
            {"strategy", to_string(p.strategy)},
            {"positions", p.positions},
            {"stats", p.stats}};
  switch (p.strategy) {
    case ArtifactStrategy::kZScore: j["k"] = p.k; break;
    case ArtifactStrategy::kTopN: j["n"] = p.top_n; break;
    case ArtifactStrategy::kCumulativeRatio: j["ratio"] = p.ratio; break;
  }
  return j;
}

inline Json to_json(const SteeringBundle& b) {
  return {{"num_layers", b.num_layers()},
          {"dim", b.dim()},
          {"beta_default", b.beta_default},
          {"num_samples", b.num_samples},
          {"sign_convention", b.sign_convention},
          {"singular_values", b.singular_values},
          {"directions", b.directions}};
}

inline Json to_json(const ChairReport& r) {
  return {{"cs", r.cs},
          {"ci", r.ci},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"num_captions", r.num_captions},
          {"num_mentions", r.num_mentions},
          {"num_hallucinated_mentions", r.num_hallucinated_mentions},
          {"hallucinated", r.hallucinated}};
}

inline Json to_json(const FaithfulnessCurve& c) {
  return {{"mode", c.mode == CurveMode::kInsertion ? "insertion" : "deletion"},
          {"x", c.x},
          {"y", c.y},
          {"auc", c.auc}};
}

inline Json to_json(const TaylorReport& r) {
  return {{"epsilon", r.epsilon},
          {"lhs", r.lhs},
          {"rhs", r.rhs},
          {"residual", r.residual},
          {"residual_half", r.residual_half},
          {"ratio_at_half_eps", r.ratio_at_half_eps}};
}

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

inline Json to_json(const PatchGrid& g) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < g.rows; ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < g.cols; ++c) {
      const auto p = g.patch(r * g.cols + c);
      row.push_back(std::vector<double>(p.begin(), p.end()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Parses an image given as rows x cols x patch_dim nested arrays.
inline PatchGrid patch_grid_from_json(const Json& j) {
  const auto bad = [](const std::string& why) { fail(ErrorCode::kFormatError, "image: " + why); };
  if (!j.is_array() || j.empty()) bad("expected a non-empty array of rows");
  if (!j[0].is_array() || j[0].empty()) bad("expected a non-empty array of patches");
  if (!j[0][0].is_array() || j[0][0].empty()) bad("expected a non-empty patch vector");
  PatchGrid g(j.size(), j[0].size(), j[0][0].size());
  for (std::size_t r = 0; r < g.rows; ++r) {
    if (!j[r].is_array() || j[r].size() != g.cols) bad("ragged rows");
    for (std::size_t c = 0; c < g.cols; ++c) {
      const Json& p = j[r][c];
      if (!p.is_array() || p.size() != g.patch_dim) bad("ragged patch vectors");
      auto dst = g.patch(r * g.cols + c);
      for (std::size_t k = 0; k < g.patch_dim; ++k) {
        if (!p[k].is_number()) bad("non-numeric entry");
        dst[k] = p[k].get<double>();
      }
    }
  }
  return g;
}

/// Shortest round-trip decimal for CSV cells.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string llr_csv(const LlrReport& r) {
  std::ostringstream out;
  out << "position,token_id,logp_image,logp_noise,llr\n";
  for (const auto& e : r.entries) {
    out << e.position << ',' << e.token_id << ',' << format_double(e.logp_image) << ','
        << format_double(e.logp_noise) << ',' << format_double(e.llr) << '\n';
  }
  return out.str();
}

/// One row per caption.
inline std::string chair_csv(const ChairReport& r) {
  std::ostringstream out;
  out << "sample,num_mentions,num_hallucinated,hallucinated\n";
  for (std::size_t i = 0; i < r.num_captions; ++i) {
    out << i << ',' << r.mentioned[i].size() << ',' << r.hallucinated[i].size() << ',';
    for (std::size_t k = 0; k < r.hallucinated[i].size(); ++k) out << (k ? ";" : "") << r.hallucinated[i][k];
    out << '\n';
  }
  return out.str();
}

struct CurveSeries {
  std::string label;
  FaithfulnessCurve curve;
  std::string color = "#1f77b4";
};

/// Minimal line plot of probability against fraction of patches.
inline std::string curves_svg(const std::vector<CurveSeries>& series, const std::string& title) {
  constexpr double kW = 480, kH = 320, kPad = 48;
  double ymax = 0.0;
  for (const auto& s : series)
    for (double y : s.curve.y) ymax = std::max(ymax, y);
  if (ymax <= 0.0) ymax = 1.0;
  const auto px = [&](double x) { return kPad + x * (kW - 2 * kPad); };
  const auto py = [&](double y) { return kH - kPad - y / ymax * (kH - 2 * kPad); };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n"
    << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\"" << kH - kPad
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
    << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\" font-size=\"11\">fraction of patches</text>\n"
    << "<text x=\"12\" y=\"" << kPad - 8 << "\" font-size=\"11\">p (max " << format_double(ymax) << ")</text>\n";
  double legend_y = kPad;
  for (const auto& s : series) {
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.curve.x.size(); ++i) o << px(s.curve.x[i]) << ',' << py(s.curve.y[i]) << ' ';
    o << "\"/>\n<text x=\"" << kW - kPad - 140 << "\" y=\"" << legend_y << "\" font-size=\"11\" fill=\"" << s.color
      << "\">" << s.label << " auc=" << format_double(s.curve.auc).substr(0, 6) << "</text>\n";
    legend_y += 14;
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace valse
