#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "contrail/common.hpp"
#include "contrail/corpus.hpp"
#include "contrail/text.hpp"

namespace contrail {

struct Claim {
  std::string id;
  std::string title;
  std::string published;  // ISO date, YYYY-MM-DD
  std::vector<std::string> topics;

  bool has_topic(const std::string& topic) const {
    return std::find(topics.begin(), topics.end(), topic) != topics.end();
  }
};

inline json to_json(const Claim& c) {
  return {{"id", c.id}, {"title", c.title}, {"published", c.published}, {"topics", c.topics}};
}

inline Claim claim_from_json(const json& j) {
  Claim c;
  c.id = j.at("id").get<std::string>();
  c.title = j.at("title").get<std::string>();
  c.published = j.value("published", "");
  if (j.contains("topics")) c.topics = j["topics"].get<std::vector<std::string>>();
  if (c.id.empty()) throw Error("claim id must be non-empty");
  if (text::is_blank(c.title)) throw Error("claim title must be non-empty: " + c.id);
  return c;
}

/// Reads a claims JSONL file. Duplicate ids are an error.
inline std::vector<Claim> load_claims(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read claims file: " + path);
  std::vector<Claim> claims;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank(line)) continue;
    Claim c;
    try {
      c = claim_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!seen.insert(c.id).second) throw Error("duplicate claim id: " + c.id);
    claims.push_back(std::move(c));
  }
  return claims;
}

inline void save_claims(const std::string& path, const std::vector<Claim>& claims) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write claims file: " + path);
  for (const auto& c : claims) out << to_json(c).dump() << '\n';
}

/// Lowercased, punctuation-free claim tokens with stopwords removed.
inline std::vector<std::string> preprocess(std::string_view title) {
  return text::content_tokens(title);
}

enum class CandidateSource { base_keyword, generated, annotated };

inline std::string to_string(CandidateSource s) {
  switch (s) {
    case CandidateSource::base_keyword:
      return "base_keyword";
    case CandidateSource::annotated:
      return "annotated";
    default:
      return "generated";
  }
}

inline CandidateSource candidate_source_from_string(std::string_view s) {
  if (s == "base_keyword") return CandidateSource::base_keyword;
  if (s == "annotated") return CandidateSource::annotated;
  if (s == "generated") return CandidateSource::generated;
  throw Error("unknown candidate source: " + std::string(s));
}

/// Canonical set key for a term list: sorted, space-joined.
inline std::string terms_key(std::vector<std::string> terms) {
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  std::string key;
  for (const auto& t : terms) {
    if (!key.empty()) key += ' ';
    key += t;
  }
  return key;
}

struct CandidateQuery {
  std::string claim_id;
  std::vector<std::string> terms;  // ordered by first appearance in the claim
  CandidateSource source = CandidateSource::generated;

  std::string key() const { return terms_key(terms); }
};

inline json to_json(const CandidateQuery& q) {
  return {{"claim_id", q.claim_id}, {"terms", q.terms}, {"source", to_string(q.source)}};
}

inline CandidateQuery candidate_from_json(const json& j) {
  CandidateQuery q;
  q.claim_id = j.at("claim_id").get<std::string>();
  q.terms = j.at("terms").get<std::vector<std::string>>();
  q.source = candidate_source_from_string(j.value("source", "generated"));
  return q;
}

enum class CandidateMode { combinations, contiguous };

inline CandidateMode candidate_mode_from_string(std::string_view s) {
  if (s == "combinations") return CandidateMode::combinations;
  if (s == "contiguous") return CandidateMode::contiguous;
  throw Error("unknown candidate mode: " + std::string(s));
}

/// Optional corpus-level inverse document frequencies used to rank capped
/// candidate lists. Without it every token has idf 1 and the ranking falls
/// back to within-claim term frequency.
using IdfTable = std::unordered_map<std::string, double>;

inline constexpr std::size_t kMinQueryTerms = 2;
inline constexpr std::size_t kMaxQueryTerms = 4;

/// Candidate keyword queries of 2 to 4 claim tokens.
///
/// combinations: every unordered subset of the distinct claim tokens, ranked by
/// the descending sum of per-token tf-idf and truncated to `cap` (0 = no cap).
/// Ties keep enumeration order: smaller subsets first, then lexicographic by
/// token position. contiguous: n-grams of length 2-4 over the token sequence,
/// shorter n-grams first, duplicates (as sets) removed; `cap` truncates.
inline std::vector<CandidateQuery> candidate_queries(const Claim& claim, CandidateMode mode,
                                                     std::size_t cap,
                                                     const IdfTable* idf = nullptr) {
  const auto tokens = preprocess(claim.title);
  std::vector<CandidateQuery> out;
  std::set<std::string> seen;
  auto emit = [&](std::vector<std::string> terms) {
    CandidateQuery q{claim.id, std::move(terms), CandidateSource::generated};
    if (seen.insert(q.key()).second) out.push_back(std::move(q));
  };

  if (mode == CandidateMode::contiguous) {
    for (std::size_t n = kMinQueryTerms; n <= kMaxQueryTerms; ++n) {
      for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::vector<std::string> terms;
        for (std::size_t k = i; k < i + n; ++k)
          if (std::find(terms.begin(), terms.end(), tokens[k]) == terms.end())
            terms.push_back(tokens[k]);
        if (terms.size() >= kMinQueryTerms) emit(std::move(terms));
      }
    }
    if (cap > 0 && out.size() > cap) out.resize(cap);
    return out;
  }

  std::vector<std::string> distinct;
  for (const auto& t : tokens)
    if (std::find(distinct.begin(), distinct.end(), t) == distinct.end()) distinct.push_back(t);
  if (distinct.size() < kMinQueryTerms) {
    warn("claim " + claim.id + " has fewer than 2 content tokens; no candidates");
    return out;
  }

  std::vector<double> weight(distinct.size());
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    const double tf = static_cast<double>(std::count(tokens.begin(), tokens.end(), distinct[i])) /
                      static_cast<double>(tokens.size());
    double w_idf = 1.0;
    if (idf) {
      auto it = idf->find(distinct[i]);
      if (it != idf->end()) w_idf = it->second;
    }
    weight[i] = tf * w_idf;
  }

  struct Scored {
    std::vector<std::size_t> idx;
    double score;
  };
  std::vector<Scored> subsets;
  std::vector<std::size_t> current;
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t want) {
    if (current.size() == want) {
      double s = 0.0;
      for (std::size_t i : current) s += weight[i];
      subsets.push_back({current, s});
      return;
    }
    for (std::size_t i = start; i < distinct.size(); ++i) {
      current.push_back(i);
      rec(i + 1, want);
      current.pop_back();
    }
  };
  for (std::size_t n = kMinQueryTerms; n <= std::min(kMaxQueryTerms, distinct.size()); ++n)
    rec(0, n);
  std::stable_sort(subsets.begin(), subsets.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  if (cap > 0 && subsets.size() > cap) subsets.resize(cap);
  for (const auto& s : subsets) {
    std::vector<std::string> terms;
    for (std::size_t i : s.idx) terms.push_back(distinct[i]);
    emit(std::move(terms));
  }
  return out;
}

/// Uniform sample without replacement of min(n, |hits|) hits, returned in
/// timestamp order. Deterministic given the seed.
inline Hits annotation_sample(const CandidateQuery& candidate, const DocumentStore& store,
                              std::size_t n, std::uint64_t seed,
                              const QueryOptions& options = {}) {
  const Hits hits = store.query(candidate.terms, options);
  Rng rng(seed);
  Hits out;
  for (std::size_t i : sample_without_replacement(hits.size(), n, rng)) out.push_back(hits[i]);
  return out;
}

inline constexpr std::size_t kAnnotationSampleSize = 20;

struct GroundTruthLabel {
  std::string claim_id;
  std::vector<std::string> terms;
  bool relevant = false;
  std::string annotator;
  std::int64_t ts = 0;

  bool operator==(const GroundTruthLabel&) const = default;
};

inline json to_json(const GroundTruthLabel& l) {
  return {{"claim_id", l.claim_id}, {"terms", l.terms},       {"relevant", l.relevant ? 1 : 0},
          {"annotator", l.annotator}, {"ts", l.ts}};
}

inline GroundTruthLabel label_from_json(const json& j) {
  GroundTruthLabel l;
  l.claim_id = j.at("claim_id").get<std::string>();
  l.terms = j.at("terms").get<std::vector<std::string>>();
  const auto& r = j.at("relevant");
  if (r.is_boolean())
    l.relevant = r.get<bool>();
  else if (r.is_number_integer() && (r.get<int>() == 0 || r.get<int>() == 1))
    l.relevant = r.get<int>() == 1;
  else
    throw Error("label field 'relevant' must be 0 or 1");
  l.annotator = j.value("annotator", "");
  l.ts = j.value("ts", std::int64_t{0});
  if (l.claim_id.empty()) throw Error("label claim_id must be non-empty");
  if (l.terms.empty()) throw Error("label terms must be non-empty");
  for (auto& t : l.terms) t = text::normalize_term(t);
  return l;
}

/// Append-only JSONL label log with last-write-wins per (claim_id, term set).
class LabelStore {
 public:
  LabelStore() = default;
  explicit LabelStore(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;  // a missing file is an empty store
    std::string line;
    while (std::getline(in, line)) {
      if (text::is_blank(line)) continue;
      apply(label_from_json(json::parse(line)));
    }
  }

  /// Records a label; persisted immediately when the store is file-backed.
  void put(GroundTruthLabel label) {
    if (!path_.empty()) {
      std::ofstream out(path_, std::ios::app);
      if (!out) throw Error("cannot append to labels file: " + path_);
      out << to_json(label).dump() << '\n';
    }
    apply(std::move(label));
  }

  /// Current labels, ordered by claim id then term key.
  std::vector<GroundTruthLabel> all() const {
    std::vector<GroundTruthLabel> out;
    for (const auto& [claim, by_terms] : latest_)
      for (const auto& [key, label] : by_terms) out.push_back(label);
    return out;
  }

  std::vector<GroundTruthLabel> for_claim(const std::string& claim_id) const {
    std::vector<GroundTruthLabel> out;
    auto it = latest_.find(claim_id);
    if (it == latest_.end()) return out;
    for (const auto& [key, label] : it->second) out.push_back(label);
    return out;
  }

  /// Claims with at least one relevant label.
  std::vector<std::string> labeled_claims() const {
    std::vector<std::string> out;
    for (const auto& [claim, by_terms] : latest_)
      for (const auto& [key, label] : by_terms)
        if (label.relevant) {
          out.push_back(claim);
          break;
        }
    return out;
  }

  std::optional<bool> relevance(const std::string& claim_id,
                                const std::vector<std::string>& terms) const {
    auto it = latest_.find(claim_id);
    if (it == latest_.end()) return std::nullopt;
    auto jt = it->second.find(terms_key(terms));
    if (jt == it->second.end()) return std::nullopt;
    return jt->second.relevant;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [c, m] : latest_) n += m.size();
    return n;
  }

  const std::string& path() const { return path_; }

 private:
  void apply(GroundTruthLabel label) {
    const std::string key = terms_key(label.terms);
    latest_[label.claim_id][key] = std::move(label);
  }

  std::string path_;
  std::map<std::string, std::map<std::string, GroundTruthLabel>> latest_;
};

}  // namespace contrail
