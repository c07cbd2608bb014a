#pragma once

#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "contrail/claims.hpp"
#include "contrail/common.hpp"
#include "contrail/corpus.hpp"
#include "contrail/wmd.hpp"

namespace contrail {

inline constexpr std::size_t kNumFeatures = 7;

/// The seven ranking features of a candidate query, in fixed order:
/// hit count, median/mean pairwise similarity of the spanning subset,
/// median/mean subset-to-claim similarity, median TextRank and median tf-idf
/// of the query terms. -1 marks an undefined statistic.
struct FeatureVector {
  std::array<double, kNumFeatures> values{};

  double hit_count() const { return values[0]; }
  double median_pairwise_sim() const { return values[1]; }
  double median_claim_sim() const { return values[2]; }
  double mean_pairwise_sim() const { return values[3]; }
  double mean_claim_sim() const { return values[4]; }
  double median_textrank() const { return values[5]; }
  double median_tfidf() const { return values[6]; }

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  bool operator==(const FeatureVector&) const = default;
};

struct TextRankOptions {
  std::size_t window = 2;
  double damping = 0.85;
  std::size_t max_iters = 1000;
  double tol = 1e-10;
};

/// TextRank over an undirected co-occurrence graph: tokens are linked when
/// they appear within `window` positions of each other.
inline std::map<std::string, double> textrank_scores(const std::vector<std::string>& tokens,
                                                     const TextRankOptions& opt = {}) {
  std::map<std::string, std::size_t> id;
  std::vector<std::string> names;
  for (const auto& t : tokens)
    if (id.emplace(t, names.size()).second) names.push_back(t);
  const std::size_t n = names.size();
  std::vector<std::set<std::size_t>> adj(n);
  const std::size_t window = std::max<std::size_t>(opt.window, 2);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (std::size_t k = i + 1; k < tokens.size() && k < i + window; ++k) {
      const std::size_t a = id[tokens[i]], b = id[tokens[k]];
      if (a == b) continue;
      adj[a].insert(b);
      adj[b].insert(a);
    }
  }
  std::vector<double> score(n, 1.0), next(n);
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    double delta = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      double s = 0.0;
      for (std::size_t u : adj[v]) s += score[u] / static_cast<double>(adj[u].size());
      next[v] = (1.0 - opt.damping) + opt.damping * s;
      delta = std::max(delta, std::abs(next[v] - score[v]));
    }
    score.swap(next);
    if (delta < opt.tol) break;
  }
  std::map<std::string, double> out;
  for (std::size_t v = 0; v < n; ++v) out[names[v]] = score[v];
  return out;
}

/// Smoothed inverse document frequency: ln((1 + N) / (1 + df)) + 1.
inline double smoothed_idf(std::size_t n_docs, std::size_t df) {
  return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(df))) + 1.0;
}

/// tf-idf of each term: tf over the claim tokens, idf over the store.
inline std::map<std::string, double> tfidf_scores(const std::vector<std::string>& terms,
                                                  const std::vector<std::string>& claim_tokens,
                                                  const DocumentStore& store) {
  std::map<std::string, double> out;
  for (const auto& term : terms) {
    double tf = 0.0;
    if (!claim_tokens.empty())
      tf = static_cast<double>(std::count(claim_tokens.begin(), claim_tokens.end(), term)) /
           static_cast<double>(claim_tokens.size());
    out[term] = tf * smoothed_idf(store.size(), store.document_frequency(term));
  }
  return out;
}

/// Corpus idf for every token of the claim; feeds candidate ranking.
inline IdfTable claim_idf(const Claim& claim, const DocumentStore& store) {
  IdfTable idf;
  for (const auto& t : preprocess(claim.title))
    idf[t] = smoothed_idf(store.size(), store.document_frequency(t));
  return idf;
}

struct SimilarityStats {
  double median_pairwise = kSentinel;
  double median_claim = kSentinel;
  double mean_pairwise = kSentinel;
  double mean_claim = kSentinel;
};

/// Similarity statistics over the documents of a spanning subset. Similarity is
/// 1 / (1 + WMD). Documents without in-vocabulary tokens contribute no pairs.
inline SimilarityStats similarity_stats(const std::vector<std::vector<std::string>>& docs,
                                        const std::vector<std::string>& claim_tokens,
                                        const WordVectors& vectors,
                                        WmdMethod method = WmdMethod::automatic) {
  std::vector<double> pairwise, to_claim;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (std::size_t j = i + 1; j < docs.size(); ++j) {
      try {
        pairwise.push_back(distance_to_similarity(wmd(docs[i], docs[j], vectors, method)));
      } catch (const Error&) {
      }
    }
    try {
      to_claim.push_back(distance_to_similarity(wmd(docs[i], claim_tokens, vectors, method)));
    } catch (const Error&) {
    }
  }
  SimilarityStats s;
  if (!pairwise.empty()) {
    s.median_pairwise = median(pairwise);
    s.mean_pairwise = mean(pairwise);
  }
  if (!to_claim.empty()) {
    s.median_claim = median(to_claim);
    s.mean_claim = mean(to_claim);
  }
  return s;
}

struct FeatureOptions {
  QueryOptions scope;  // e.g. restrict hits to one platform
  SpanFractions fractions;
  WmdMethod wmd_method = WmdMethod::automatic;
  TextRankOptions textrank;
};

/// Content tokens (stopwords removed) of a stored document.
inline std::vector<std::string> document_content_tokens(const DocumentStore& store,
                                                        const Document* d) {
  std::vector<std::string> out;
  for (const auto& t : store.tokens(store.index_of(d)))
    if (!text::is_stopword(t)) out.push_back(t);
  return out;
}

/// Runs query -> spanning subset -> the seven features. The subset seed is
/// derived from the term set, so term order never changes the result.
inline FeatureVector extract_features(const CandidateQuery& candidate, const Claim& claim,
                                      const DocumentStore& store, const WordVectors& vectors,
                                      std::uint64_t seed, const FeatureOptions& opt = {}) {
  FeatureVector fv;
  const Hits hits = store.query(candidate.terms, opt.scope);
  fv[0] = static_cast<double>(hits.size());

  const auto subset =
      spanning_subset(hits, derive_seed(seed, candidate.key()), opt.fractions).all();
  std::vector<std::vector<std::string>> docs;
  docs.reserve(subset.size());
  for (const Document* d : subset) docs.push_back(document_content_tokens(store, d));
  const auto claim_tokens = preprocess(claim.title);
  const auto sims = similarity_stats(docs, claim_tokens, vectors, opt.wmd_method);
  fv[1] = sims.median_pairwise;
  fv[2] = sims.median_claim;
  fv[3] = sims.mean_pairwise;
  fv[4] = sims.mean_claim;

  std::vector<double> tr, ti;
  if (!claim_tokens.empty()) {
    const auto rank = textrank_scores(claim_tokens, opt.textrank);
    for (const auto& t : candidate.terms) {
      auto it = rank.find(t);
      tr.push_back(it == rank.end() ? 0.0 : it->second);
    }
  }
  for (const auto& [t, s] : tfidf_scores(candidate.terms, claim_tokens, store)) ti.push_back(s);
  fv[5] = tr.empty() ? 0.0 : median(tr);
  fv[6] = ti.empty() ? 0.0 : median(ti);
  return fv;
}

}  // namespace contrail
