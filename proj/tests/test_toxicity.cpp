#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "contrail/toxicity.hpp"
#include "test_util.hpp"

using namespace contrail;
using namespace contrail::toxicity;

namespace {

Document doc(const std::string& id, const std::string& text) {
  return {id, Platform::reddit, "c", Kind::comment, 100, text, std::nullopt};
}

struct FakeClock {
  double t = 0.0;
  Clock clock() {
    return {[this] { return t; }, [this](double s) { t += std::max(0.0, s); }};
  }
};

std::string perspective_body(double v) {
  return json{{"attributeScores", {{"SEVERE_TOXICITY", {{"summaryScore", {{"value", v}}}}}}}}.dump();
}

}  // namespace

TEST(Toxicity, StubDeterministicAndBounded) {
  Client a(ClientConfig{}), b(ClientConfig{});
  const auto d = doc("1", "some text here");
  const auto s1 = a.score(d), s2 = b.score(d);
  ASSERT_TRUE(s1 && s2);
  EXPECT_EQ(s1->score, s2->score);
  EXPECT_EQ(s1->source, Source::stub);
  EXPECT_EQ(s1->score, stub_score("some text here", "SEVERE_TOXICITY"));
  for (int i = 0; i < 200; ++i) {
    const double s = stub_score("text " + std::to_string(i), "SEVERE_TOXICITY");
    EXPECT_GE(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
}

TEST(Toxicity, CacheHitIdenticalAndPersisted) {
  const auto dir = test_util::scratch_dir("tox");
  ClientConfig cfg;
  cfg.cache_path = dir + "/cache.jsonl";
  std::remove(cfg.cache_path.c_str());
  Client c(cfg);
  const auto first = c.score(doc("1", "same words"));
  const auto second = c.score(doc("2", "same words"));
  EXPECT_EQ(second->source, Source::cached);
  EXPECT_EQ(second->score, first->score);
  Client reopened(cfg);
  const auto third = reopened.score(doc("3", "same words"));
  EXPECT_EQ(third->source, Source::cached);
  EXPECT_EQ(json(third->score).dump(), json(first->score).dump());
  const std::string cache = read_file(cfg.cache_path);
  EXPECT_EQ(std::count(cache.begin(), cache.end(), '\n'), 1);
}

TEST(Toxicity, RateLimitRespected) {
  FakeClock fc;
  ClientConfig cfg;
  cfg.mode = "remote";
  cfg.requests_per_second = 1.0;
  Client c(cfg, [](const std::string&) { return HttpReply{200, perspective_body(0.25)}; }, fc.clock());
  std::vector<Document> docs;
  for (int i = 0; i < 1000; ++i) docs.push_back(doc(std::to_string(i), "distinct text " + std::to_string(i)));
  Hits hits;
  for (const auto& d : docs) hits.push_back(&d);
  const auto r = c.score_all(hits);
  EXPECT_EQ(r.scores.size(), 1000u);
  EXPECT_EQ(c.requests_sent(), 1000u);
  // the first request goes out immediately, each later one waits a full second
  EXPECT_GE(fc.t, 999.0);
  EXPECT_EQ(r.scores[0].source, Source::remote);
  EXPECT_EQ(r.scores[0].score, 0.25);
}

TEST(Toxicity, RetriesQuotaThenSucceeds) {
  FakeClock fc;
  ClientConfig cfg;
  cfg.mode = "remote";
  cfg.requests_per_second = 100.0;
  int calls = 0;
  Client c(cfg,
           [&](const std::string& body) {
             EXPECT_NE(body.find("\"requestedAttributes\":{\"SEVERE_TOXICITY\":{}}"), std::string::npos);
             return ++calls < 3 ? HttpReply{429, ""} : HttpReply{200, perspective_body(0.5)};
           },
           fc.clock());
  const auto s = c.score(doc("1", "x"));
  ASSERT_TRUE(s);
  EXPECT_EQ(calls, 3);
  EXPECT_GE(fc.t, 1.0 + 2.0);  // two backoffs
}

TEST(Toxicity, FailuresLeaveDocumentsUnscored) {
  FakeClock fc;
  ClientConfig cfg;
  cfg.mode = "remote";
  cfg.max_retries = 2;
  cfg.requests_per_second = 100.0;
  int calls = 0;
  Client c(cfg, [&](const std::string&) { ++calls; return HttpReply{503, ""}; }, fc.clock());
  test_util::WarningCapture cap;
  const auto d1 = doc("a", "one"), d2 = doc("b", "two");
  const auto r = c.score_all({&d1, &d2});
  EXPECT_TRUE(r.scores.empty());
  EXPECT_EQ(r.unscored, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(calls, 6);
  Client bad(cfg, [](const std::string&) { return HttpReply{400, ""}; }, fc.clock());
  EXPECT_FALSE(bad.score(d1).has_value());
}

TEST(Toxicity, RemoteOverLocalHttp) {
  httplib::Server svr;
  std::atomic<int> hits{0};
  svr.Post("/analyze", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const auto body = json::parse(req.body);
    const double v = body.at("comment").at("text") == "bad" ? 0.9 : 0.1;
    res.set_content(perspective_body(v), "application/json");
  });
  const int port = svr.bind_to_any_port("127.0.0.1");
  std::thread th([&] { svr.listen_after_bind(); });
  svr.wait_until_ready();
  ClientConfig cfg;
  cfg.mode = "remote";
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/analyze";
  cfg.requests_per_second = 1000.0;
  Client c(cfg);
  EXPECT_EQ(c.score(doc("1", "bad"))->score, 0.9);
  EXPECT_EQ(c.score(doc("2", "fine"))->score, 0.1);
  EXPECT_EQ(hits.load(), 2);
  svr.stop();
  th.join();
}

TEST(Toxicity, ConfigValidation) {
  EXPECT_THROW(ClientConfig::from_json({{"mode", "magic"}}), Error);
  EXPECT_THROW(ClientConfig::from_json({{"requests_per_second", 0}}), Error);
  EXPECT_EQ(ClientConfig::from_json(json::object()).model, "SEVERE_TOXICITY");
}
