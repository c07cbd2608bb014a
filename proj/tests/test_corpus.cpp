#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "contrail/corpus.hpp"
#include "test_util.hpp"

using namespace contrail;

namespace {

Document make_doc(std::string id, std::int64_t ts, std::string text,
                  std::string community = "politics") {
  Document d;
  d.id = std::move(id);
  d.platform = Platform::reddit;
  d.community = std::move(community);
  d.kind = Kind::post;
  d.timestamp = ts;
  d.text = std::move(text);
  return d;
}

}  // namespace

TEST(Ingest, CountsMalformedLines) {
  const auto dir = test_util::scratch_dir("ingest_counts");
  const auto path = test_util::write_lines(
      dir + "/r.jsonl",
      R"({"id":"a1","subreddit":"politics","created_utc":1600000000,"title":"Soros funds lasers","selftext":"body"})"
      "\n"
      "{not json\n"
      R"({"id":"c1","subreddit":"conspiracy","created_utc":"1600000100","body":"reply here","link_id":"t3_a1"})"
      "\n");
  DocumentStore store;
  const auto report = store.ingest(path, DumpFormat::reddit_jsonl);
  EXPECT_EQ(report.accepted, 2u);
  EXPECT_EQ(report.rejected, 1u);
  EXPECT_EQ(report.counts.at("politics").at("post"), 1u);
  EXPECT_EQ(report.counts.at("conspiracy").at("comment"), 1u);
  ASSERT_EQ(store.size(), 2u);
  EXPECT_EQ(store.documents()[0].text, "Soros funds lasers\nbody");
  EXPECT_EQ(store.documents()[1].parent_id, "a1");
  EXPECT_EQ(store.children("a1").size(), 1u);
}

TEST(Ingest, EmptyFile) {
  const auto dir = test_util::scratch_dir("ingest_empty");
  const auto path = test_util::write_lines(dir + "/e.jsonl", "");
  DocumentStore store;
  const auto report = store.ingest(path, DumpFormat::reddit_jsonl);
  EXPECT_EQ(report.accepted, 0u);
  EXPECT_EQ(report.rejected, 0u);
}

TEST(Ingest, DuplicateIdsAreIdempotent) {
  const auto dir = test_util::scratch_dir("ingest_dup");
  const auto path = test_util::write_lines(
      dir + "/r.jsonl",
      R"({"id":"a1","subreddit":"politics","created_utc":1600000000,"title":"one"})"
      "\n"
      R"({"id":"a2","subreddit":"politics","created_utc":1600000001,"title":"two"})"
      "\n");
  DocumentStore store;
  store.ingest(path, DumpFormat::reddit_jsonl);
  EXPECT_EQ(store.size(), 2u);
  const auto second = store.ingest(path, DumpFormat::reddit_jsonl);
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(second.accepted, 0u);
  EXPECT_EQ(second.duplicates, 2u);
}

TEST(Ingest, TitleOnlyOption) {
  const auto dir = test_util::scratch_dir("ingest_title");
  const auto path = test_util::write_lines(
      dir + "/r.jsonl",
      R"({"id":"a1","subreddit":"politics","created_utc":1600000000,"title":"title words","selftext":"laser"})"
      "\n");
  DocumentStore store;
  store.ingest(path, DumpFormat::reddit_jsonl, IngestOptions{.include_post_body = false});
  EXPECT_TRUE(store.query({"laser"}).empty());
  EXPECT_EQ(store.query({"title"}).size(), 1u);
}

TEST(Ingest, TwitterFormats) {
  const auto dir = test_util::scratch_dir("ingest_twitter");
  const auto path = test_util::write_lines(
      dir + "/t.jsonl",
      R"({"id_str":"100","created_at":"Wed Oct 10 20:19:24 +0000 2018","full_text":"Soros again","text":"trunc"})"
      "\n"
      R"({"id_str":"101","timestamp_ms":"1539202764000","text":"second tweet"})"
      "\n"
      R"({"id_str":"102","text":"no time"})"
      "\n");
  DocumentStore store;
  const auto report = store.ingest(path, "twitter_jsonl");
  EXPECT_EQ(report.accepted, 2u);
  EXPECT_EQ(report.rejected, 1u);
  const auto hits = store.query({"soros"});
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0]->timestamp, 1539202764);
  EXPECT_EQ(hits[0]->text, "Soros again");
  EXPECT_EQ(hits[0]->kind, Kind::tweet);
  EXPECT_EQ(hits[0]->community, "twitter");
}

TEST(Ingest, Errors) {
  DocumentStore store;
  EXPECT_THROW(store.ingest("/nonexistent/file.jsonl", DumpFormat::reddit_jsonl), Error);
  const auto dir = test_util::scratch_dir("ingest_fmt");
  const auto path = test_util::write_lines(dir + "/x.jsonl", "");
  EXPECT_THROW(store.ingest(path, "mastodon_jsonl"), Error);
}

TEST(Query, ConjunctiveTokenMatch) {
  DocumentStore store;
  store.add(make_doc("1", 10, "George Soros funds X"));
  store.add(make_doc("2", 20, "The party started"));
  store.seal();
  EXPECT_EQ(store.query({"soros"}).size(), 1u);
  EXPECT_TRUE(store.query({"soros", "laser"}).empty());
  EXPECT_TRUE(store.query({"art"}).empty());  // no substring matches
  EXPECT_EQ(store.query({"SOROS"}).size(), 1u);
  EXPECT_THROW(store.query({}), Error);
}

TEST(Query, FiltersAndOrdering) {
  DocumentStore store;
  store.add(make_doc("b", 30, "laser", "conspiracy"));
  store.add(make_doc("a", 30, "laser", "politics"));
  store.add(make_doc("c", 10, "laser", "politics"));
  store.seal();
  auto hits = store.query({"laser"});
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0]->id, "c");
  EXPECT_EQ(hits[1]->id, "a");  // same timestamp: ties by id
  EXPECT_EQ(hits[2]->id, "b");
  EXPECT_EQ(store.query({"laser"}, {.community = "politics"}).size(), 2u);
  EXPECT_EQ(store.query({"laser"}, {.time_range = TimeRange{20, 40}}).size(), 2u);
  EXPECT_TRUE(store.query({"laser"}, {.platform = Platform::twitter}).empty());
}

TEST(Query, UnsealedStoreRefuses) {
  DocumentStore store;
  store.add(make_doc("1", 10, "text"));
  EXPECT_THROW(store.query({"text"}), Error);
}

TEST(Store, RejectsInvalidDocuments) {
  DocumentStore store;
  EXPECT_THROW(store.add(make_doc("1", 0, "x")), Error);
  EXPECT_THROW(store.add(make_doc("1", 5, "   ")), Error);
}

// 500 synthetic docs with a planted term pattern; brute-force linear scan oracle.
TEST(Query, MatchesLinearScanOracle) {
  Rng rng(7);
  const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "soros", "laser",
                                          "vaccine", "chip", "ballot", "dominion"};
  DocumentStore store;
  std::vector<std::set<std::string>> token_sets;
  std::size_t planted = 0;
  for (int i = 0; i < 500; ++i) {
    std::string text;
    std::set<std::string> toks;
    // exactly 37 documents contain both "soros" and "laser"
    const bool plant = i % 13 == 0 && planted < 37;
    for (int k = 0; k < 6; ++k) {
      std::string w = vocab[rng.below(vocab.size())];
      if (w == "laser" && !plant) w = "chip";
      text += w + " ";
      toks.insert(w);
    }
    if (plant) {
      text += "Soros LASER";
      toks.insert("soros");
      toks.insert("laser");
      ++planted;
    }
    store.add(make_doc("d" + std::to_string(i), 1000 + i, text));
    token_sets.push_back(toks);
  }
  store.seal();
  ASSERT_EQ(planted, 37u);
  const auto hits = store.query({"soros", "laser"});
  std::size_t oracle = 0;
  for (const auto& d : store.documents()) {
    const auto t = text::tokenize(d.text);
    const std::set<std::string> s(t.begin(), t.end());
    oracle += s.count("soros") && s.count("laser");
  }
  EXPECT_EQ(hits.size(), 37u);
  EXPECT_EQ(oracle, 37u);
}

// Property: query equals a brute-force scan, and adding terms only shrinks.
TEST(QueryProperty, ScanEquivalenceAndMonotoneShrink) {
  const std::vector<std::string> vocab = {"a1", "b2", "c3", "d4", "e5", "f6", "g7"};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    DocumentStore store;
    const std::size_t n = 50 + rng.below(200);
    for (std::size_t i = 0; i < n; ++i) {
      std::string text;
      for (std::size_t k = 0; k < 1 + rng.below(5); ++k) text += vocab[rng.below(vocab.size())] + " ";
      store.add(make_doc("d" + std::to_string(i), 1 + static_cast<std::int64_t>(rng.below(1000)), text));
    }
    store.seal();
    for (int q = 0; q < 10; ++q) {
      std::vector<std::string> a{vocab[rng.below(vocab.size())]};
      std::vector<std::string> ab = a;
      ab.push_back(vocab[rng.below(vocab.size())]);
      std::vector<const Document*> scan;
      for (const auto& d : store.documents()) {
        const auto t = text::tokenize(d.text);
        bool all = true;
        for (const auto& term : ab) all = all && std::find(t.begin(), t.end(), term) != t.end();
        if (all) scan.push_back(&d);
      }
      const auto hits_ab = store.query(ab);
      EXPECT_EQ(hits_ab, scan);
      const auto hits_a = store.query(a);
      for (const auto* d : hits_ab) EXPECT_NE(std::find(hits_a.begin(), hits_a.end(), d), hits_a.end());
    }
  }
}

TEST(Store, SaveLoadAndExportRoundTrip) {
  const auto dir = test_util::scratch_dir("store_roundtrip");
  DocumentStore store;
  auto d1 = make_doc("1", 10, "George Soros \xE2\x80\x9C" "funds\xE2\x80\x9D X");
  auto d2 = make_doc("2", 20, "reply", "conspiracy");
  d2.kind = Kind::comment;
  d2.parent_id = "1";
  store.add(d1);
  store.add(d2);
  store.seal();
  store.save(dir + "/store.idx");
  const auto loaded = DocumentStore::load(dir + "/store.idx");
  EXPECT_EQ(loaded.documents(), store.documents());
  std::ostringstream a, b;
  store.export_jsonl(a);
  loaded.export_jsonl(b);
  EXPECT_EQ(a.str(), b.str());
  test_util::write_lines(dir + "/bad.idx", "contrail-store v0\n");
  EXPECT_THROW(DocumentStore::load(dir + "/bad.idx"), Error);
}

TEST(SpanningSubset, PaperFractions) {
  std::vector<int> hits(100);
  for (int i = 0; i < 100; ++i) hits[static_cast<std::size_t>(i)] = i;
  const auto s = spanning_subset(hits, 42);
  EXPECT_EQ(s.oldest.size(), 20u);
  EXPECT_EQ(s.newest.size(), 20u);
  EXPECT_EQ(s.middle_sample.size(), 6u);
  EXPECT_EQ(s.oldest.front(), 0);
  EXPECT_EQ(s.newest.back(), 99);
  for (int m : s.middle_sample) {
    EXPECT_GE(m, 20);
    EXPECT_LT(m, 80);
  }
}

TEST(SpanningSubset, SmallAndEmpty) {
  std::vector<int> five{1, 2, 3, 4, 5};
  const auto s = spanning_subset(five, 1);
  EXPECT_EQ(s.oldest, five);
  EXPECT_TRUE(s.newest.empty());
  EXPECT_TRUE(s.middle_sample.empty());
  EXPECT_TRUE(spanning_subset(std::vector<int>{}, 1).empty());
}

TEST(SpanningSubset, DeterministicAndDisjoint) {
  for (std::size_t n = 0; n < 300; n += 7) {
    std::vector<std::size_t> hits(n);
    for (std::size_t i = 0; i < n; ++i) hits[i] = i;
    const auto a = spanning_subset(hits, 99);
    const auto b = spanning_subset(hits, 99);
    EXPECT_EQ(a.all(), b.all());
    auto all = a.all();
    std::sort(all.begin(), all.end());
    EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end()) << "n=" << n;
    EXPECT_LE(all.size(), n);
  }
}
