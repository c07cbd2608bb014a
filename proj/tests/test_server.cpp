#include <gtest/gtest.h>

#include <thread>

#include "contrail/server.hpp"
#include "test_util.hpp"

using namespace contrail;

namespace {

// 42 documents mention "vaccine chip"; 8 mention only "vaccine".
DocumentStore fixture_store() {
  DocumentStore s;
  for (int i = 0; i < 42; ++i)
    s.add({"v" + std::to_string(i), Platform::reddit, "conspiracy", Kind::post, 1000 + i,
           "the vaccine has a chip inside number " + std::to_string(i), std::nullopt});
  for (int i = 0; i < 8; ++i)
    s.add({"o" + std::to_string(i), Platform::twitter, "twitter", Kind::tweet, 5000 + i, "vaccine rollout update",
           std::nullopt});
  s.seal();
  return s;
}

std::vector<Claim> fixture_claims() {
  return {{"c1", "Vaccine contains a tracking chip", "2020-05-01", {"covid"}},
          {"c2", "Pizza restaurant hides trafficking ring", "2016-11-01", {"clinton"}}};
}

class Api : public ::testing::Test {
 protected:
  void start(std::vector<Claim> claims) {
    dir_ = test_util::scratch_dir("server");
    labels_ = dir_ + "/labels.jsonl";
    api_ = std::make_unique<server::AnnotationApi>(store_, std::move(claims), labels_);
    port_ = api_->bind_any();
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { api_->listen_after_bind(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 100 && !client_->Get("/progress"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  void TearDown() override {
    if (api_) api_->stop();
    if (thread_.joinable()) thread_.join();
  }
  json get(const std::string& path, int expect = 200) {
    auto r = client_->Get(path);
    EXPECT_TRUE(r);
    if (!r) return {};
    EXPECT_EQ(r->status, expect) << path << " " << r->body;
    return json::parse(r->body);
  }
  json post(const std::string& path, const std::string& body, int expect = 200) {
    auto r = client_->Post(path, body, "application/json");
    EXPECT_TRUE(r);
    if (!r) return {};
    EXPECT_EQ(r->status, expect) << path << " " << r->body;
    return json::parse(r->body);
  }

  DocumentStore store_ = fixture_store();
  std::string dir_, labels_;
  std::unique_ptr<server::AnnotationApi> api_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(Api, QueryReturnsHitCountAndBoundedSample) {
  start(fixture_claims());
  const json r = post("/query", R"({"terms":["vaccine","chip"]})");
  EXPECT_EQ(r["hits"], 42);
  ASSERT_EQ(r["sample"].size(), 20u);
  std::set<std::string> ids;
  for (const auto& d : r["sample"]) {
    EXPECT_EQ(d["id"].get<std::string>()[0], 'v');
    ids.insert(d["id"]);
  }
  EXPECT_EQ(ids.size(), 20u);
  EXPECT_EQ(post("/query", R"({"terms":["Vaccine"]})")["hits"], 50);
  const json few = post("/query", R"({"terms":["rollout"]})");
  EXPECT_EQ(few["hits"], 8);
  EXPECT_EQ(few["sample"].size(), 8u);
  // same request, same sample
  EXPECT_EQ(post("/query", R"({"terms":["vaccine","chip"]})"), r);
}

TEST_F(Api, LabelIncrementsProgressAndPersists) {
  start(fixture_claims());
  json p = get("/progress");
  EXPECT_EQ(p["claims"], 2);
  EXPECT_EQ(p["labeled"], 0);
  post("/labels", R"({"claim_id":"c1","terms":["chip","vaccine"],"relevant":0})");
  EXPECT_EQ(get("/progress")["labeled"], 0);  // only a rejected query so far
  const json r = post("/labels", R"({"claim_id":"c1","terms":["vaccine","tracking"],"relevant":1})");
  EXPECT_EQ(r["progress"]["labeled"], 1);
  p = get("/progress");
  EXPECT_EQ(p["labeled"], 1);
  EXPECT_EQ(p["labels"], 2);
  EXPECT_EQ(p["per_claim"]["c1"]["relevant"], 1);

  const LabelStore reread(labels_);
  EXPECT_EQ(reread.size(), 2u);
  EXPECT_EQ(reread.relevance("c1", {"tracking", "vaccine"}), true);
  EXPECT_EQ(get("/claims")[0]["labeled"], true);
}

TEST_F(Api, CandidatesListClaimQueriesWithLabels) {
  start(fixture_claims());
  post("/labels", R"({"claim_id":"c1","terms":["vaccine","chip"],"relevant":true})");
  const json r = get("/claims/c1/candidates");
  EXPECT_EQ(r["tokens"], json({"vaccine", "contains", "tracking", "chip"}));
  EXPECT_EQ(r["candidates"].size(), 11u);  // 6 pairs, 4 triples, 1 quadruple
  int marked = 0;
  for (const auto& c : r["candidates"])
    if (c.contains("relevant")) ++marked;
  EXPECT_EQ(marked, 1);
  EXPECT_EQ(r["labels"].size(), 1u);
}

TEST_F(Api, ErrorsAreReportedPerField) {
  start(fixture_claims());
  EXPECT_EQ(post("/query", "not json", 400)["fields"].count("body"), 1u);
  EXPECT_EQ(post("/query", R"({"terms":"vaccine"})", 400)["fields"].count("terms"), 1u);
  EXPECT_EQ(post("/query", R"({"terms":["a","b","c","d","e"]})", 400)["fields"].count("terms"), 1u);
  EXPECT_EQ(post("/query", R"({"terms":["vaccine"],"claim_id":"zzz"})", 404)["error"], "unknown claim");

  const json bad = post("/labels", R"({"terms":["vaccine"],"relevant":"yes"})", 400);
  EXPECT_EQ(bad["fields"].count("claim_id"), 1u);
  EXPECT_EQ(bad["fields"].count("terms"), 1u);
  EXPECT_EQ(bad["fields"].count("relevant"), 1u);
  post("/labels", R"({"claim_id":"zzz","terms":["vaccine","chip"],"relevant":1})", 404);
  EXPECT_EQ(post("/labels", R"({"claim_id":"c1","terms":["vaccine","pizza"],"relevant":1})", 400)["fields"].count("terms"),
            1u);
  get("/claims/zzz/candidates", 404);
  EXPECT_FALSE(std::filesystem::exists(labels_));
}

TEST_F(Api, EmptyClaimFileListsNothing) {
  start({});
  EXPECT_EQ(get("/claims"), json::array());
  EXPECT_EQ(get("/progress")["claims"], 0);
}

TEST_F(Api, ConcurrentLabelWritesAreSerialized) {
  start(fixture_claims());
  std::vector<std::thread> writers;
  for (int t = 0; t < 4; ++t)
    writers.emplace_back([this, t] {
      httplib::Client c("127.0.0.1", port_);
      for (int i = 0; i < 10; ++i) {
        const json body = {{"claim_id", "c2"}, {"terms", {"pizza", "trafficking"}}, {"relevant", (t + i) % 2}};
        auto r = c.Post("/labels", body.dump(), "application/json");
        ASSERT_TRUE(r);
        ASSERT_EQ(r->status, 200);
      }
    });
  for (auto& w : writers) w.join();
  const std::string text = read_file(labels_);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 40);
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) EXPECT_NO_THROW(label_from_json(json::parse(line)));
}

TEST_F(Api, StoreIsNeverModified) {
  const auto before = store_.documents();
  start(fixture_claims());
  post("/query", R"({"terms":["vaccine","chip"]})");
  post("/labels", R"({"claim_id":"c1","terms":["vaccine","chip"],"relevant":1})");
  get("/claims/c1/candidates");
  EXPECT_EQ(store_.documents(), before);
}

}  // namespace
