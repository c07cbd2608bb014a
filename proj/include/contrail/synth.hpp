#pragma once

// Synthetic fixtures shared by the tests, the acceptance binary and the CLI.

#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "contrail/claims.hpp"
#include "contrail/common.hpp"
#include "contrail/corpus.hpp"
#include "contrail/hawkes.hpp"
#include "contrail/ltr/dataset.hpp"
#include "contrail/wmd.hpp"

namespace contrail::synth {

/// Groups where f1 alone orders relevant rows first: positives draw f1 from
/// [10, 20), negatives from [0, 5). The other features are noise.
inline ltr::RankingDataset separable_dataset(std::size_t groups, std::size_t rows_per_group,
                                             std::uint64_t seed, double positive_rate = 0.3) {
  Rng rng(seed);
  ltr::RankingDataset ds;
  for (std::size_t g = 0; g < groups; ++g) {
    ltr::QueryGroup q{"q" + std::to_string(g), {}};
    const std::size_t n_pos =
        std::max<std::size_t>(1, static_cast<std::size_t>(positive_rate * static_cast<double>(rows_per_group)));
    for (std::size_t r = 0; r < rows_per_group; ++r) {
      ltr::Row row;
      row.label = r < n_pos ? 1 : 0;
      row.features[0] = row.label ? 10.0 + 10.0 * rng.uniform() : 5.0 * rng.uniform();
      for (std::size_t f = 1; f < kNumFeatures; ++f) row.features[f] = rng.uniform();
      // positives sort last by key so ties never favour them
      row.terms = (row.label ? "z" : "a") + std::to_string(r);
      q.rows.push_back(row);
    }
    ds.groups.push_back(std::move(q));
  }
  return ds;
}

/// Groups that an additive model cannot rank: relevant rows sit at (0,0) and
/// (1,1) on features f1, f2 while irrelevant rows sit at (0,1) and (1,0).
/// An extra (1,0) negative breaks the symmetry so a greedy first split has
/// gain. Needs trees with at least four leaves.
/// The remaining features are constant.
inline ltr::RankingDataset interaction_dataset(std::size_t groups) {
  ltr::RankingDataset ds;
  const int cells[5][3] = {{0, 0, 1}, {1, 1, 1}, {0, 1, 0}, {1, 0, 0}, {1, 0, 0}};
  for (std::size_t g = 0; g < groups; ++g) {
    ltr::QueryGroup q{"q" + std::to_string(g), {}};
    for (std::size_t r = 0; r < 5; ++r) {
      ltr::Row row;
      row.features[0] = cells[r][0];
      row.features[1] = cells[r][1];
      row.label = cells[r][2];
      row.terms = (row.label ? "z" : "a") + std::to_string(r);
      q.rows.push_back(row);
    }
    ds.groups.push_back(std::move(q));
  }
  return ds;
}


// ---------------------------------------------------------------------------
// Synthetic corpora

/// A claim with its planted best query and topical context words.
struct PlantedClaim {
  Claim claim;
  std::vector<std::string> true_terms;
  std::vector<std::string> context;
};

struct CorpusFixture {
  std::vector<PlantedClaim> claims;
  DocumentStore store;
  WordVectors vectors;
  LabelStore labels;

  std::vector<Claim> claim_list() const {
    std::vector<Claim> out;
    for (const auto& p : claims) out.push_back(p.claim);
    return out;
  }
};

/// Pronounceable pseudo-words, distinct for distinct (seed, index).
inline std::string pseudo_word(std::size_t index, std::size_t salt = 0) {
  static const char* const on[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static const char* const nu[] = {"a", "e", "i", "o", "u"};
  std::string w;
  std::size_t x = index * 7919 + salt * 104729 + 11;
  for (int s = 0; s < 3; ++s) {
    w += on[x % 14];
    x /= 14;
    w += nu[x % 5];
    x /= 5;
  }
  return w + std::to_string(index % 10);
}

enum class TimeProfile { uniform, bursty };

struct PortabilityOptions {
  std::size_t claims = 10;
  std::size_t on_topic = 30;     // documents per claim containing the planted pair
  std::size_t distractors = 20;  // documents per claim with one planted term
  TimeProfile time = TimeProfile::uniform;
  std::size_t first_claim = 0;  // offsets claim ids and vocabulary
  std::uint64_t seed = 1;
};

/// Claims over a shared pseudo-word vocabulary. Every claim has six words;
/// the first two form the planted query, which every on-topic document
/// contains. Vectors place each claim's words near a claim centroid.
inline CorpusFixture portability_fixture(const PortabilityOptions& opt) {
  CorpusFixture fx;
  Rng rng(opt.seed);
  Rng vec_rng(4242);  // vectors depend only on the vocabulary, not the store
  const std::size_t dim = 8;
  fx.vectors = WordVectors(dim);
  std::vector<std::string> filler;
  for (std::size_t i = 0; i < 40; ++i) {
    filler.push_back(pseudo_word(i, 900));
    std::vector<double> v(dim);
    for (auto& x : v) x = vec_rng.normal();
    fx.vectors.set(filler.back(), v);
  }
  for (std::size_t c = opt.first_claim; c < opt.first_claim + opt.claims; ++c) {
    PlantedClaim pc;
    std::vector<std::string> words;
    for (std::size_t w = 0; w < 6; ++w) words.push_back(pseudo_word(c * 6 + w, 17));
    for (std::size_t w = 0; w < 6; ++w) pc.context.push_back(pseudo_word(c * 6 + w, 31));
    std::string title;
    for (const auto& w : words) title += (title.empty() ? "" : " ") + w;
    pc.claim = {"p" + std::to_string(c), title, "2020-01-01", {}};
    pc.true_terms = {words[0], words[1]};
    std::vector<double> centre(dim);
    for (auto& x : centre) x = 3.0 * vec_rng.normal();
    for (const auto& w : words) {
      std::vector<double> v(centre);
      for (auto& x : v) x += 0.3 * vec_rng.normal();
      fx.vectors.set(w, v);
    }
    for (const auto& w : pc.context) {
      std::vector<double> v(centre);
      for (auto& x : v) x += 0.5 * vec_rng.normal();
      fx.vectors.set(w, v);
    }
    fx.claims.push_back(pc);
  }

  const std::int64_t t0 = 1577836800;  // 2020-01-01
  const double span_days = 365.0;
  auto timestamp = [&](std::size_t n, std::size_t total) -> std::int64_t {
    double day;
    if (opt.time == TimeProfile::uniform) {
      day = span_days * (static_cast<double>(n) + rng.uniform()) / static_cast<double>(total);
    } else {
      // three bursts with exponential decay
      const double start = span_days * static_cast<double>(rng.below(3)) / 3.0;
      day = std::min(span_days - 1.0, start + rng.exponential(0.2));
    }
    return t0 + static_cast<std::int64_t>(day * 86400.0) + 1;
  };
  std::size_t serial = 0;
  auto add = [&](const std::vector<std::string>& words, std::int64_t ts, const std::string& community) {
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    fx.store.add({"d" + std::to_string(serial++), Platform::reddit, community, Kind::post, ts, text, std::nullopt});
  };
  const std::vector<std::string> communities{"alpha", "beta", "gamma"};
  for (const auto& pc : fx.claims) {
    const auto words = preprocess(pc.claim.title);
    for (std::size_t n = 0; n < opt.on_topic; ++n) {
      std::vector<std::string> d{words[0], words[1]};
      for (std::size_t w = 2; w < words.size(); ++w)
        if (rng.uniform() < 0.3) d.push_back(words[w]);
      for (int k = 0; k < 4; ++k) d.push_back(pc.context[rng.below(pc.context.size())]);
      rng.shuffle(d);
      add(d, timestamp(n, opt.on_topic), communities[rng.below(3)]);
    }
    for (std::size_t n = 0; n < opt.distractors; ++n) {
      std::vector<std::string> d{words[rng.below(2)]};
      for (std::size_t w = 2; w < words.size(); ++w)
        if (rng.uniform() < 0.5) d.push_back(words[w]);
      for (int k = 0; k < 5; ++k) d.push_back(filler[rng.below(filler.size())]);
      rng.shuffle(d);
      add(d, timestamp(n, opt.distractors), communities[rng.below(3)]);
    }
  }
  fx.store.seal();
  for (const auto& pc : fx.claims) fx.labels.put({pc.claim.id, pc.true_terms, true, "planted", 1});
  return fx;
}

// ---------------------------------------------------------------------------
// Bundled mini corpus

struct MiniClaimSpec {
  const char* id;
  const char* title;
  const char* published;
  const char* topic;
  std::array<const char*, 2> true_terms;
  std::array<const char*, 4> negative_pairs;  // two labeled non-relevant pairs
  std::array<const char*, 10> context;
};

inline const std::vector<MiniClaimSpec>& mini_claims() {
  static const std::vector<MiniClaimSpec> specs{
      {"c1", "Hillary Clinton secretly sold uranium rights to Russia for donations", "2019-03-04",
       "clinton", {"uranium", "russia"}, {"secretly", "sold", "rights", "donations"},
       {"mining", "deal", "foundation", "kremlin", "nuclear", "ore", "approval", "investors", "canada", "reactor"}},
      {"c2", "Clinton campaign ran a child trafficking ring from a pizza restaurant", "2019-06-10",
       "clinton", {"pizza", "trafficking"}, {"campaign", "ran", "child", "restaurant"},
       {"basement", "emails", "podesta", "code", "cheese", "tunnels", "victims", "owner", "leaked", "dc"}},
      {"c3", "Trump tower hides a secret server linked to Alfa bank", "2019-09-16",
       "trump", {"server", "alfa"}, {"tower", "hides", "secret", "linked"},
       {"dns", "lookups", "logs", "traffic", "moscow", "investigators", "pings", "domain", "data", "cyber"}},
      {"c4", "Cellular 5G towers spread the coronavirus across major cities", "2020-03-23",
       "covid", {"5g", "coronavirus"}, {"cellular", "towers", "across", "major"},
       {"radiation", "masts", "wuhan", "signals", "burned", "frequency", "symptoms", "antenna", "network", "immune"}},
      {"c5", "Bill Gates plans to implant microchips through covid vaccines", "2020-05-04",
       "covid", {"microchips", "vaccines"}, {"bill", "plans", "implant", "gates"},
       {"tracking", "patent", "injection", "digital", "id", "dose", "population", "needle", "foundation", "trials"}},
  };
  return specs;
}

inline const std::vector<std::string>& mini_communities() {
  static const std::vector<std::string> c{"conspiracy", "politics", "news", "twitter"};
  return c;
}

/// Writes the mini corpus (dumps, claims, labels, config) into `dir`.
/// Event times per claim come from a planted 4-community Hawkes cascade.
inline json write_mini_corpus(const std::string& dir, std::uint64_t seed = 7) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  Rng rng(seed);
  const auto& comms = mini_communities();
  const std::map<std::string, std::vector<std::string>> flavour{
      {"conspiracy", {"truth", "wake", "sheeple", "hidden", "agenda", "exposed"}},
      {"politics", {"policy", "senate", "vote", "democrats", "republicans", "election"}},
      {"news", {"report", "officials", "according", "sources", "statement", "confirmed"}},
      {"twitter", {"thread", "breaking", "viral", "retweet", "lol", "trending"}}};
  const std::vector<std::string> filler{
      "people", "think", "know", "really", "story", "week", "today", "look", "never", "always",
      "government", "media", "public", "money", "world", "news", "country", "reason", "question", "proof",
      "point", "claim", "source", "video", "article", "watch", "read", "share", "post", "comment",
      "weather", "game", "music", "food", "travel", "market", "school", "phone", "car", "movie"};
  const std::int64_t day = 86400;

  std::vector<json> submissions, comments, tweets;
  std::size_t serial = 0;
  auto next_id = [&] { return "m" + std::to_string(100000 + serial++); };
  auto join = [](std::vector<std::string> words, Rng& r) {
    r.shuffle(words);
    std::string s;
    for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
    return s;
  };
  auto pick = [&](const std::vector<std::string>& v) { return v[rng.below(v.size())]; };
  // posts per (claim, community), for comment threading
  std::map<std::string, std::vector<std::pair<std::string, std::int64_t>>> threads;

  auto emit = [&](const std::string& community, std::int64_t ts, const std::string& text,
                  const std::string& thread_key, bool allow_comment) {
    if (community == "twitter") {
      tweets.push_back({{"id_str", next_id()}, {"timestamp_ms", std::to_string(ts * 1000)}, {"full_text", text}});
      return;
    }
    auto& posts = threads[thread_key];
    if (!allow_comment || posts.empty() || rng.uniform() < 0.4) {
      const std::string id = next_id();
      submissions.push_back({{"id", id}, {"subreddit", community}, {"created_utc", ts}, {"title", text}, {"selftext", ""}});
      posts.push_back({id, ts});
      // off-keyword replies under the post
      if (rng.uniform() < 0.5) {
        std::vector<std::string> w;
        for (int k = 0; k < 6; ++k) w.push_back(pick(filler));
        w.push_back(pick(flavour.at(community)));
        comments.push_back({{"id", next_id()}, {"subreddit", community}, {"created_utc", ts + 600 + static_cast<std::int64_t>(rng.below(3600))},
                            {"body", join(w, rng)}, {"link_id", "t3_" + id}, {"parent_id", "t3_" + id}});
      }
      return;
    }
    const auto& parent = posts[rng.below(posts.size())];
    comments.push_back({{"id", next_id()}, {"subreddit", community}, {"created_utc", std::max(ts, parent.second + 60)},
                        {"body", text}, {"link_id", "t3_" + parent.first}, {"parent_id", "t3_" + parent.first}});
  };

  std::vector<Claim> claims;
  for (const auto& spec : mini_claims()) {
    Claim c{spec.id, spec.title, spec.published, {spec.topic}};
    claims.push_back(c);
    const auto words = preprocess(c.title);
    std::vector<std::string> context(spec.context.begin(), spec.context.end());
    // conspiracy seeds the others; twitter echoes itself
    hawkes::HawkesParams p{{0.16, 0.05, 0.05, 0.08},
                           {{0.10, 0.25, 0.15, 0.35}, {0.05, 0.10, 0.05, 0.10}, {0.05, 0.05, 0.05, 0.15}, {0.0, 0.0, 0.0, 0.2}},
                           1.0};
    const auto series = hawkes::simulate(p, 300.0, derive_seed(seed, c.id));
    std::int64_t origin = 0;
    {
      int y, m, d;
      std::sscanf(spec.published, "%d-%d-%d", &y, &m, &d);
      origin = detail::days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d)) * day;
    }
    for (const auto& e : hawkes::merged_events(series)) {
      std::vector<std::string> w{spec.true_terms[0], spec.true_terms[1]};
      for (const auto& t : words)
        if (t != spec.true_terms[0] && t != spec.true_terms[1] && rng.uniform() < 0.3) w.push_back(t);
      for (int k = 0; k < 4; ++k) w.push_back(pick(context));
      for (int k = 0; k < 2; ++k) w.push_back(pick(filler));
      w.push_back(pick(flavour.at(comms[e.c])));
      const auto ts = origin + static_cast<std::int64_t>(e.t * static_cast<double>(day)) + 1;
      emit(comms[e.c], ts, join(w, rng), std::string(spec.id) + "/" + comms[e.c], true);
    }
    // distractors: one planted term among unrelated chatter
    for (int n = 0; n < 90; ++n) {
      std::vector<std::string> w{spec.true_terms[rng.below(2)]};
      for (const auto& t : words)
        if (rng.uniform() < 0.2) w.push_back(t);
      for (int k = 0; k < 6; ++k) w.push_back(pick(filler));
      const std::string community = comms[rng.below(comms.size())];
      w.push_back(pick(flavour.at(community)));
      emit(community, origin + static_cast<std::int64_t>(rng.below(300)) * day + 7, join(w, rng),
           "noise/" + community, true);
    }
  }
  // general chatter, mostly in the mainstream communities
  const std::int64_t start = detail::days_from_civil(2019, 1, 1) * day;
  for (int n = 0; n < 420; ++n) {
    std::vector<std::string> w;
    for (int k = 0; k < 8; ++k) w.push_back(pick(filler));
    const std::string community = n % 5 == 0 ? "conspiracy" : comms[1 + rng.below(3)];
    w.push_back(pick(flavour.at(community)));
    emit(community, start + static_cast<std::int64_t>(rng.below(700)) * day + 11, join(w, rng),
         "noise/" + community, true);
  }

  auto write_jsonl = [&](const std::string& name, const std::vector<json>& rows) {
    std::string s;
    for (const auto& r : rows) s += r.dump() + "\n";
    write_file(dir + "/" + name, s);
  };
  write_jsonl("reddit_submissions.jsonl", submissions);
  write_jsonl("reddit_comments.jsonl", comments);
  write_jsonl("tweets.jsonl", tweets);
  save_claims(dir + "/claims.jsonl", claims);

  std::string labels;
  std::int64_t ts = 1600000000;
  for (const auto& spec : mini_claims()) {
    if (std::string(spec.id) == "c5") continue;  // left for the model to pick
    labels += json{{"claim_id", spec.id}, {"terms", {spec.true_terms[0], spec.true_terms[1]}}, {"relevant", 1}, {"annotator", "mini"}, {"ts", ts++}}.dump() + "\n";
    for (int k = 0; k < 4; k += 2)
      labels += json{{"claim_id", spec.id}, {"terms", {spec.negative_pairs[static_cast<std::size_t>(k)], spec.negative_pairs[static_cast<std::size_t>(k) + 1]}}, {"relevant", 0}, {"annotator", "mini"}, {"ts", ts++}}.dump() + "\n";
  }
  write_file(dir + "/labels.jsonl", labels);

  const json config = {
      {"paths",
       {{"claims", "claims.jsonl"},
        {"dumps",
         {{{"path", "reddit_submissions.jsonl"}, {"format", "reddit_jsonl"}},
          {{"path", "reddit_comments.jsonl"}, {"format", "reddit_jsonl"}},
          {{"path", "tweets.jsonl"}, {"format", "twitter_jsonl"}}}},
        {"labels", "labels.jsonl"},
        {"output", "out"}}},
      {"communities", comms},
      {"baseline_communities", {"politics", "news"}},
      {"candidates", {{"mode", "combinations"}, {"cap", 0}}},
      {"vectors", {{"dim", 16}, {"epochs", 5}, {"min_count", 2}}},
      {"ltr",
       {{"folds", 4},
        {"grid", {{"num_leaves", {4, 8}}, {"num_bags", {10}}, {"trees_per_bag", {5, 10}}, {"min_leaf_support", {1}}}}}},
      {"embeddings", {{"dim", 16}, {"epochs", 5}, {"min_count", 2}, {"min_documents", 20}}},
      {"hawkes", {{"iters", 600}, {"burn_in", 150}, {"topics", {"clinton", "trump", "covid"}}}},
      {"scoring", {{"mode", "stub"}}},
      {"seed", 1}};
  write_file(dir + "/config.json", config.dump(2) + "\n");
  return {{"submissions", submissions.size()}, {"comments", comments.size()}, {"tweets", tweets.size()}};
}

}  // namespace contrail::synth
