#include "test_support.hpp"
#include "valse/service.hpp"

using namespace valse;
using namespace valse::testing;

namespace {

SteeringBundle constant_bundle(const ModelConfig& c, double value) {
  SteeringBundle b;
  for (std::size_t l = 0; l < c.num_layers; ++l) b.directions.push_back(std::vector<double>(c.hidden_dim, value));
  return b;
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = small_config(2, 2, 16, 3);
    ServiceOptions opts;
    opts.max_new = 6;
    opts.default_prompt = {3, 4};
    service_ = std::make_unique<InspectorService>(build_model(config_), opts);
    service_->register_bundle("strong", constant_bundle(config_, 2.0));
    port_ = service_->bind("127.0.0.1", 0);
    service_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override { service_->stop(); }

  Json post(const std::string& path, const Json& body, int expect = 200) {
    auto res = client_->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res) << path;
    if (!res) return {};
    EXPECT_EQ(res->status, expect) << path << " " << res->body;
    return Json::parse(res->body);
  }
  std::string get_raw(const std::string& path, int expect = 200) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res) << path;
    if (!res) return {};
    EXPECT_EQ(res->status, expect) << path << " " << res->body;
    return res->body;
  }
  Json get(const std::string& path, int expect = 200) { return Json::parse(get_raw(path, expect)); }

  std::string new_session(std::uint64_t image_seed) {
    return post("/session", {{"image", to_json(random_image(config_, image_seed))}})["id"];
  }

  ModelConfig config_;
  std::unique_ptr<InspectorService> service_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

}  // namespace

TEST_F(ServiceTest, CreateSessionContract) {
  const PatchGrid img = random_image(config_, 1);
  const Json j = post("/session", {{"image", to_json(img)}, {"prompt", {5, 6}}});
  EXPECT_EQ(j["revision"], 1);
  EXPECT_TRUE(j["id"].is_string());
  const TokenSequence prompt = TokenSequence::make(9, std::vector<int>{kBosToken}, std::vector<int>{5, 6});
  const Generation g = generate(service_->model(), img, prompt, 6);
  EXPECT_EQ(j["response"]["ids"].get<std::vector<int>>(), g.sequence.response_ids());
  EXPECT_EQ(j["llr"]["entries"].size(), g.sequence.response_positions().size());
  const LlrReport r = compute_llr(service_->model(), img, g.sequence, std::uint64_t{0});
  for (std::size_t i = 0; i < r.entries.size(); ++i) EXPECT_EQ(j["llr"]["entries"][i]["llr"].get<double>(), r.entries[i].llr);
}

TEST_F(ServiceTest, MapMatchesLibraryAndSuppressionIsLocal) {
  const PatchGrid img = random_image(config_, 2);
  const std::string id = post("/session", {{"image", to_json(img)}})["id"];
  const Json s = get("/session/" + id);
  const auto positions = s["response"]["positions"].get<std::vector<std::size_t>>();
  ASSERT_FALSE(positions.empty());
  const std::size_t pos = positions.back();
  const Json plain = get("/session/" + id + "/map?pos=" + std::to_string(pos));
  const Json sup = get("/session/" + id + "/map?pos=" + std::to_string(pos) + "&suppress=true&k=0.5");
  const TokenSequence base = TokenSequence::make(9, std::vector<int>{kBosToken}, std::vector<int>{3, 4})
                                 .with_response(s["response"]["ids"].get<std::vector<int>>());
  const ContributionMap lib = contribution_map_for_token(service_->model(), img, base, pos);
  EXPECT_EQ(plain["values"].get<std::vector<double>>(), lib.values);
  EXPECT_EQ(plain["grid"], Json::array({3, 3}));
  const auto flagged = sup["suppressed"].get<std::vector<std::size_t>>();
  EXPECT_EQ(flagged, sup["profile"]["positions"].get<std::vector<std::size_t>>());
  const auto a = plain["values"].get<std::vector<double>>();
  const auto b = sup["values"].get<std::vector<double>>();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::find(flagged.begin(), flagged.end(), i) == flagged.end()) {
      EXPECT_EQ(a[i], b[i]);
    }
  }
  const Json top = get("/session/" + id + "/map?pos=" + std::to_string(pos) + "&suppress=true&strategy=top_n&n=2");
  EXPECT_EQ(top["suppressed"].size(), 2u);
}

TEST_F(ServiceTest, RepeatedGetsAreByteIdentical) {
  const std::string id = new_session(3);
  const std::string pos = std::to_string(get("/session/" + id)["response"]["positions"][0].get<std::size_t>());
  for (const std::string& path : {"/session/" + id, "/session/" + id + "/llr", "/session/" + id + "/map?pos=" + pos,
                                 "/session/" + id + "/pca?layer=1", "/session/" + id + "/compare",
                                 "/session/" + id + "/attention?layer=0&pos=" + pos}) {
    EXPECT_EQ(get_raw(path), get_raw(path)) << path;
  }
}

TEST_F(ServiceTest, ZeroBetaRegenerateMatchesBaseline) {
  const std::string id = new_session(4);
  const Json st = post("/session/" + id + "/steering", {{"bundle", "strong"}, {"beta", 0.0}});
  EXPECT_EQ(st["revision"], 2);
  const Json regen = post("/session/" + id + "/regenerate", Json::object());
  EXPECT_EQ(regen["revision"], 3);
  const Json cmp = get("/session/" + id + "/compare");
  EXPECT_EQ(cmp["baseline"]["ids"], cmp["steered"]["ids"]);
  EXPECT_TRUE(cmp["diff"].empty());
}

TEST_F(ServiceTest, SteeringIsolatedPerSession) {
  const std::string a = new_session(5);
  const std::string b = new_session(5);
  const std::string before = get_raw("/session/" + b + "/compare");
  post("/session/" + a + "/steering", {{"bundle", "strong"}, {"beta", 3.0}});
  post("/session/" + a + "/regenerate", Json::object());
  post("/session/" + b + "/regenerate", Json::object());
  const Json cmp_b = get("/session/" + b + "/compare");
  EXPECT_EQ(cmp_b["baseline"]["ids"], cmp_b["steered"]["ids"]);
  EXPECT_TRUE(cmp_b["diff"].empty());
  EXPECT_EQ(get("/session/" + b)["steering"], Json(nullptr));
  (void)before;
}

TEST_F(ServiceTest, ErrorsAreJson) {
  EXPECT_EQ(get("/session/nope", 404)["error"], "NotFound");
  EXPECT_EQ(get("/session/nope/map?pos=1", 404)["error"], "NotFound");
  const std::string id = new_session(6);
  EXPECT_EQ(post("/session/" + id + "/steering", {{"bundle", "missing"}}, 404)["error"], "NotFound");
  EXPECT_EQ(get("/session/" + id + "/map?pos=0", 400)["error"], "PositionOutOfRange");
  EXPECT_EQ(get("/session/" + id + "/map", 400)["error"], "InvalidArgument");
  EXPECT_EQ(get("/session/" + id + "/pca?layer=9", 400)["error"], "LayerOutOfRange");
  EXPECT_EQ(post("/session", {{"image", to_json(PatchGrid(2, 2, 3))}}, 400)["error"], "GridMismatch");
  auto res = client_->Post("/session", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST(ServiceSetup, BindAndBundleErrors) {
  const ModelConfig c = small_config(2, 2, 16, 3);
  InspectorService first(build_model(c));
  const int port = first.bind("127.0.0.1", 0);
  InspectorService second(build_model(c));
  EXPECT_VALSE_ERROR(second.bind("127.0.0.1", port), ErrorCode::kBindError);
  EXPECT_VALSE_ERROR(second.register_bundle("x", constant_bundle(small_config(3), 1.0)), ErrorCode::kLayerCountMismatch);
}
