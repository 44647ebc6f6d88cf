#pragma once

// JSON-over-HTTP inspector backend.
//
// Every response body carries the session id and its revision. Revisions
// advance only on mutations (steering changes, regeneration), so repeated
// GETs against an unchanged session return identical bytes.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "valse/artifacts.hpp"
#include "valse/diff.hpp"
#include "valse/relevance.hpp"
#include "valse/reports.hpp"
#include "valse/steering.hpp"
#include "valse/tokenselect.hpp"

namespace valse {

struct ServiceOptions {
  std::vector<int> system_tokens{kBosToken};
  std::vector<int> default_prompt;
  std::size_t max_new = 8;
  double alpha = kDefaultAlpha;
  double k_artifact = kDefaultArtifactK;
  std::uint64_t noise_seed = 0;
  std::vector<std::string> token_names;  // optional, for display
  Lexicon lexicon;                       // optional, highlights object mentions in /compare
};

struct Session {
  std::string id;
  PatchGrid image;
  TokenSequence prompt;
  TokenSequence baseline;               // prompt + unsteered response
  std::optional<TokenSequence> latest;  // result of the last /regenerate
  std::optional<std::string> bundle_id;
  double beta = 0.0;
  std::size_t max_new = 8;
  std::uint64_t revision = 1;
  std::optional<LlrReport> llr;  // derived from `baseline`, computed lazily
  std::mutex mu;
};

class InspectorService {
 public:
  explicit InspectorService(ToyModel model, ServiceOptions opts = {})
      : model_(std::move(model)), opts_(std::move(opts)) {
    // Address reuse only: a second server on a taken port must fail to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    routes();
  }
  ~InspectorService() { stop(); }
  InspectorService(const InspectorService&) = delete;
  InspectorService& operator=(const InspectorService&) = delete;

  /// Bundles are registered before serving and never change afterwards.
  void register_bundle(const std::string& id, SteeringBundle bundle) {
    if (bundle.num_layers() != model_.config().num_layers) {
      fail(ErrorCode::kLayerCountMismatch, "bundle '" + id + "' does not match the model depth");
    }
    bundles_[id] = std::move(bundle);
  }

  /// Binds without serving; port 0 picks a free port. Returns the port.
  int bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
      bound = server_.bind_to_any_port(host);
    } else if (!server_.bind_to_port(host, port)) {
      bound = -1;
    }
    if (bound <= 0) fail(ErrorCode::kBindError, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  /// Blocks until stop().
  void serve() { server_.listen_after_bind(); }

  void start() {
    thread_ = std::thread([this] { serve(); });
    server_.wait_until_ready();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  const ToyModel& model() const { return model_; }

 private:
  struct HttpError {
    int status;
    std::string code;
    std::string message;
  };

  [[noreturn]] static void http_fail(int status, std::string code, std::string message) {
    throw HttpError{status, std::move(code), std::move(message)};
  }

  static void send(httplib::Response& res, const Json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <class F>
  void guarded(httplib::Response& res, F&& f) {
    try {
      send(res, f());
    } catch (const HttpError& e) {
      send(res, {{"error", e.code}, {"message", e.message}}, e.status);
    } catch (const Error& e) {
      send(res, {{"error", std::string(to_string(e.code()))}, {"message", e.what()}}, 400);
    } catch (const Json::exception& e) {
      send(res, {{"error", "FormatError"}, {"message", e.what()}}, 400);
    } catch (const std::exception& e) {
      send(res, {{"error", "InternalError"}, {"message", e.what()}}, 500);
    }
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) http_fail(404, "NotFound", "no session '" + id + "'");
    return it->second;
  }

  Json tokens_json(const std::vector<int>& ids) const {
    Json out = Json::array();
    for (int t : ids) {
      const auto idx = static_cast<std::size_t>(t);
      out.push_back(t >= 0 && idx < opts_.token_names.size() ? Json(opts_.token_names[idx]) : Json(t));
    }
    return out;
  }

  Json response_json(const TokenSequence& seq) const {
    return {{"ids", seq.response_ids()},
            {"positions", seq.response_positions()},
            {"tokens", tokens_json(seq.response_ids())}};
  }

  static Json header(const Session& s) { return {{"id", s.id}, {"revision", s.revision}}; }

  const LlrReport& llr_of(Session& s) {
    if (!s.llr) {
      s.llr = s.baseline.response_positions().empty()
                  ? LlrReport{}
                  : compute_llr(model_, s.image, s.baseline, opts_.noise_seed);
    }
    return *s.llr;
  }

  Json llr_json(Session& s) {
    const LlrReport& r = llr_of(s);
    Json j = to_json(r);
    j["selected"] = r.entries.empty() ? std::vector<std::size_t>{}
                                      : select_visual_tokens(r, opts_.alpha).positions;
    j["alpha"] = opts_.alpha;
    return j;
  }

  Generation run_generation(const Session& s) const {
    if (!s.bundle_id) return generate(model_, s.image, s.prompt, s.max_new);
    const SteeringContext ctx = apply_steering(model_, bundles_.at(*s.bundle_id), s.beta);
    return ctx.generate(s.image, s.prompt, s.max_new);
  }

  static std::size_t query_size(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) http_fail(400, "InvalidArgument", std::string("missing query parameter ") + key);
    const std::string v = req.get_param_value(key);
    std::size_t used = 0;
    unsigned long long out = 0;
    try {
      out = std::stoull(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) http_fail(400, "InvalidArgument", std::string("bad integer for ") + key);
    return static_cast<std::size_t>(out);
  }

  static double query_double(const httplib::Request& req, const char* key, double fallback) {
    if (!req.has_param(key)) return fallback;
    const std::string v = req.get_param_value(key);
    std::size_t used = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(out)) {
      http_fail(400, "InvalidArgument", std::string("bad number for ") + key);
    }
    return out;
  }

  static bool query_bool(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) return false;
    const std::string v = req.get_param_value(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    http_fail(400, "InvalidArgument", std::string("bad boolean for ") + key);
  }

  Json create_session(const httplib::Request& req) {
    const Json body = Json::parse(req.body);
    if (!body.contains("image")) http_fail(400, "InvalidArgument", "body needs an image");
    auto s = std::make_shared<Session>();
    s->image = patch_grid_from_json(body.at("image"));
    const auto& c = model_.config();
    if (s->image.rows != c.grid_side || s->image.cols != c.grid_side || s->image.patch_dim != c.patch_dim) {
      fail(ErrorCode::kGridMismatch, "image does not match the model's patch grid");
    }
    const std::vector<int> prompt =
        body.contains("prompt") ? body.at("prompt").get<std::vector<int>>() : opts_.default_prompt;
    for (int t : prompt)
      if (t < 0 || static_cast<std::size_t>(t) >= c.vocab_size) fail(ErrorCode::kInvalidArgument, "prompt token out of vocabulary");
    s->max_new = body.value("max_new", opts_.max_new);
    s->prompt = TokenSequence::make(s->image.num_patches(), opts_.system_tokens, prompt);
    s->baseline = generate(model_, s->image, s->prompt, s->max_new).sequence;
    {
      std::lock_guard lock(sessions_mu_);
      s->id = "s" + std::to_string(++next_id_);
      sessions_[s->id] = s;
    }
    std::lock_guard lock(s->mu);
    Json j = header(*s);
    j["response"] = response_json(s->baseline);
    j["llr"] = llr_json(*s);
    return j;
  }

  Json get_session(Session& s) {
    Json j = header(s);
    j["image"] = to_json(s.image);
    j["prompt"] = s.prompt.prompt_only().ids;
    j["n_image"] = s.image.num_patches();
    j["grid"] = {s.image.rows, s.image.cols};
    j["response"] = response_json(s.baseline);
    j["steering"] = s.bundle_id ? Json{{"bundle", *s.bundle_id}, {"beta", s.beta}} : Json(nullptr);
    j["latest"] = s.latest ? response_json(*s.latest) : Json(nullptr);
    return j;
  }

  Json get_map(Session& s, const httplib::Request& req) {
    const std::size_t pos = query_size(req, "pos");
    const bool suppress = query_bool(req, "suppress");
    ContributionMap map = contribution_map_for_token(model_, s.image, s.baseline, pos);
    Json j = header(s);
    if (suppress) {
      const ContributionMap ref = reference_contribution_map(model_, s.image, s.baseline);
      const std::string strategy = req.has_param("strategy") ? req.get_param_value("strategy") : "zscore";
      ArtifactProfile profile;
      switch (parse_strategy(strategy)) {
        case ArtifactStrategy::kZScore:
          profile = detect_artifact_positions(ref, query_double(req, "k", opts_.k_artifact));
          break;
        case ArtifactStrategy::kTopN:
          profile = detect_top_n(ref, query_size(req, "n"));
          break;
        case ArtifactStrategy::kCumulativeRatio:
          profile = detect_cumulative_ratio(ref, query_double(req, "ratio", 0.5));
          break;
      }
      map = suppress_artifacts(map, profile);
      j["profile"] = to_json(profile);
    }
    j.update(to_json(map));
    return j;
  }

  Json get_pca(Session& s, const httplib::Request& req) {
    const std::size_t layer = query_size(req, "layer");
    const ForwardTrace t = forward(model_, s.baseline, s.image);
    Json j = header(s);
    j["layer"] = layer;
    j["coordinates"] = to_json(hidden_state_pca(t, layer));
    return j;
  }

  Json get_attention(Session& s, const httplib::Request& req) {
    const std::size_t layer = query_size(req, "layer");
    const std::size_t pos = query_size(req, "pos");
    if (pos == 0 || pos >= s.baseline.size()) fail(ErrorCode::kPositionOutOfRange, "pos");
    const ForwardTrace t = forward(model_, s.baseline, s.image);
    Json j = header(s);
    j.update(to_json(raw_attention_map(t, layer, pos - 1, s.image.rows, s.image.cols)));
    j["position"] = pos;
    j["layer"] = layer;
    return j;
  }

  Json set_steering(Session& s, const httplib::Request& req) {
    const Json body = Json::parse(req.body);
    const Json bundle = body.value("bundle", Json(nullptr));
    if (bundle.is_null()) {
      s.bundle_id.reset();
      s.beta = 0.0;
    } else {
      const std::string id = bundle.get<std::string>();
      if (!bundles_.count(id)) http_fail(404, "NotFound", "no bundle '" + id + "'");
      const double beta = body.value("beta", bundles_.at(id).beta_default);
      if (!std::isfinite(beta)) fail(ErrorCode::kInvalidArgument, "beta must be finite");
      s.bundle_id = id;
      s.beta = beta;
    }
    ++s.revision;
    Json j = header(s);
    j["steering"] = s.bundle_id ? Json{{"bundle", *s.bundle_id}, {"beta", s.beta}} : Json(nullptr);
    return j;
  }

  Json regenerate(Session& s) {
    s.latest = run_generation(s).sequence;
    ++s.revision;
    Json j = header(s);
    j["response"] = response_json(*s.latest);
    j["steering"] = s.bundle_id ? Json{{"bundle", *s.bundle_id}, {"beta", s.beta}} : Json(nullptr);
    return j;
  }

  Json compare(Session& s) {
    const auto base = s.baseline.response_ids();
    const auto other = s.latest ? s.latest->response_ids() : base;
    Json spans = Json::array();
    for (const DiffSpan& d : token_diff(base, other)) {
      spans.push_back({{"baseline", {d.a_begin, d.a_end}}, {"steered", {d.b_begin, d.b_end}}});
    }
    Json j = header(s);
    j["baseline"] = response_json(s.baseline);
    j["steered"] = s.latest ? response_json(*s.latest) : response_json(s.baseline);
    j["diff"] = spans;
    if (!opts_.lexicon.empty()) {
      j["baseline_mentions"] = extract_mentions(base, opts_.lexicon);
      j["steered_mentions"] = extract_mentions(other, opts_.lexicon);
    }
    return j;
  }

  template <class F>
  void on_session(httplib::Server::Handler& out, F f) {
    out = [this, f](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = find(req.matches[1]);
        std::lock_guard lock(s->mu);
        return f(*s, req);
      });
    };
  }

  void routes() {
    server_.Post("/session", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { return create_session(req); });
    });
    server_.Get("/bundles", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        Json j = Json::array();
        for (const auto& [id, b] : bundles_) j.push_back({{"id", id}, {"beta_default", b.beta_default}});
        return j;
      });
    });
    const auto add = [this](bool post, const std::string& pattern, auto f) {
      httplib::Server::Handler h;
      on_session(h, f);
      if (post) {
        server_.Post(pattern, h);
      } else {
        server_.Get(pattern, h);
      }
    };
    add(false, R"(/session/([^/]+))", [this](Session& s, const httplib::Request&) { return get_session(s); });
    add(false, R"(/session/([^/]+)/llr)", [this](Session& s, const httplib::Request&) {
      Json j = header(s);
      j.update(llr_json(s));
      return j;
    });
    add(false, R"(/session/([^/]+)/map)", [this](Session& s, const httplib::Request& r) { return get_map(s, r); });
    add(false, R"(/session/([^/]+)/pca)", [this](Session& s, const httplib::Request& r) { return get_pca(s, r); });
    add(false, R"(/session/([^/]+)/attention)",
        [this](Session& s, const httplib::Request& r) { return get_attention(s, r); });
    add(false, R"(/session/([^/]+)/compare)", [this](Session& s, const httplib::Request&) { return compare(s); });
    add(true, R"(/session/([^/]+)/steering)",
        [this](Session& s, const httplib::Request& r) { return set_steering(s, r); });
    add(true, R"(/session/([^/]+)/regenerate)", [this](Session& s, const httplib::Request&) { return regenerate(s); });
  }

  ToyModel model_;
  ServiceOptions opts_;
  std::map<std::string, SteeringBundle> bundles_;
  std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 0;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace valse
