#pragma once

#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "contrail/claims.hpp"
#include "contrail/features.hpp"
#include "contrail/ltr/dataset.hpp"
#include "contrail/ltr/lambdamart.hpp"
#include "contrail/ltr/metrics.hpp"
#include "contrail/ltr/nearmiss.hpp"

namespace contrail::ltr {

struct CvOptions {
  std::size_t k = 5;
  bool undersample = true;
  NearMissOptions nearmiss;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct CvResult {
  std::vector<double> fold_maps;
  double mean_map = 0.0;
  std::vector<std::vector<std::size_t>> folds;  // group indices per fold
};

/// Claim-level fold assignment: groups are shuffled with the seed and cut
/// into k contiguous folds whose sizes differ by at most one.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n_groups, std::size_t k,
                                                        std::uint64_t seed) {
  if (k < 2) throw Error("cross-validation needs k >= 2");
  if (k > n_groups)
    throw Error("k = " + std::to_string(k) + " exceeds group count " + std::to_string(n_groups));
  std::vector<std::size_t> order(n_groups);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "folds"));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n_groups / k, extra = n_groups % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(folds[f].begin(), folds[f].end());
    pos += size;
  }
  return folds;
}

/// Undersamples the training groups with a standardizer fit on those groups only.
inline RankingDataset prepare_training(const RankingDataset& train_set, const CvOptions& opt) {
  if (!opt.undersample) return train_set;
  return undersample(train_set, opt.nearmiss);
}

/// k-fold cross-validation over query groups. NearMiss-3 touches training
/// folds only; test folds are scored whole.
inline CvResult cross_validate(const RankingDataset& ds, const Hyperparams& hp, std::uint64_t seed,
                               const CvOptions& opt = {}) {
  CvResult result;
  result.folds = make_folds(ds.groups.size(), opt.k, seed);
  result.fold_maps.assign(opt.k, 0.0);
  parallel_for(
      opt.k,
      [&](std::size_t f) {
        RankingDataset train_set, test_set;
        const std::set<std::size_t> test(result.folds[f].begin(), result.folds[f].end());
        for (std::size_t g = 0; g < ds.groups.size(); ++g)
          (test.count(g) ? test_set : train_set).groups.push_back(ds.groups[g]);
        const RankerModel model = train(prepare_training(train_set, opt), hp,
                                        derive_seed(seed, "fold-" + std::to_string(f)));
        result.fold_maps[f] = mean_average_precision(model, test_set);
      },
      opt.threads);
  result.mean_map = mean(result.fold_maps);
  return result;
}

/// Hyperparameter name -> candidate values.
using Grid = std::map<std::string, std::vector<double>>;

inline Grid default_grid() {
  return {{"num_leaves", {4, 8, 16}},
          {"num_bags", {10, 30}},
          {"trees_per_bag", {5, 20}},
          {"min_leaf_support", {1, 2}}};
}

struct GridRow {
  Hyperparams hyperparams;
  CvResult cv;
};

struct GridResult {
  Hyperparams best;
  std::vector<GridRow> table;  // cartesian product in key order
};

/// Exhaustive grid search by cross-validated MAP. Ties prefer fewer total
/// trees, then fewer leaves, then the earlier grid point.
inline GridResult grid_search(const RankingDataset& ds, const Grid& grid, std::uint64_t seed,
                              const CvOptions& opt = {}, const Hyperparams& base = {}) {
  if (grid.empty()) throw Error("grid must be non-empty");
  for (const auto& [name, values] : grid)
    if (values.empty()) throw Error("grid parameter '" + name + "' has no values");
  std::vector<Hyperparams> points{base};
  for (const auto& [name, values] : grid) {
    std::vector<Hyperparams> next;
    for (const auto& p : points)
      for (double v : values) {
        Hyperparams h = p;
        h.set(name, v);
        h.validate();
        next.push_back(h);
      }
    points.swap(next);
  }
  GridResult result;
  CvOptions inner = opt;
  inner.threads = 1;
  result.table.resize(points.size());
  parallel_for(
      points.size(),
      [&](std::size_t i) { result.table[i] = {points[i], cross_validate(ds, points[i], seed, inner)}; },
      opt.threads);
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.table.size(); ++i) {
    const auto& a = result.table[i];
    const auto& b = result.table[best];
    if (a.cv.mean_map != b.cv.mean_map) {
      if (a.cv.mean_map > b.cv.mean_map) best = i;
      continue;
    }
    if (a.hyperparams.total_trees() != b.hyperparams.total_trees()) {
      if (a.hyperparams.total_trees() < b.hyperparams.total_trees()) best = i;
      continue;
    }
    if (a.hyperparams.num_leaves < b.hyperparams.num_leaves) best = i;
  }
  result.best = result.table[best].hyperparams;
  return result;
}

struct RankedCandidate {
  CandidateQuery candidate;
  FeatureVector features;
  double score = 0.0;
};

/// Featurizes every candidate of a claim and ranks by model score, ties by
/// the lexical term key. The first entry is the extraction query.
template <typename Scorer>
std::vector<RankedCandidate> rank_candidates(const Scorer& model, const Claim& claim,
                                             std::vector<CandidateQuery> candidates,
                                             const DocumentStore& store,
                                             const WordVectors& vectors, std::uint64_t seed,
                                             const FeatureOptions& fopt = {}) {
  std::vector<RankedCandidate> ranked(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    ranked[i].features = extract_features(candidates[i], claim, store, vectors, seed, fopt);
    ranked[i].score = model.score(ranked[i].features);
    ranked[i].candidate = std::move(candidates[i]);
  });
  std::vector<double> scores;
  std::vector<std::string> keys;
  for (const auto& r : ranked) {
    scores.push_back(r.score);
    keys.push_back(r.candidate.key());
  }
  std::vector<RankedCandidate> out;
  for (std::size_t i : rank_order(scores, keys)) out.push_back(std::move(ranked[i]));
  return out;
}

struct SelectOptions {
  CandidateMode mode = CandidateMode::combinations;
  std::size_t cap = 100;
  FeatureOptions features;
};

template <typename Scorer>
std::vector<RankedCandidate> select_keywords(const Scorer& model, const Claim& claim,
                                             const DocumentStore& store,
                                             const WordVectors& vectors, std::uint64_t seed,
                                             const SelectOptions& opt = {}) {
  const IdfTable idf = claim_idf(claim, store);
  auto cands = candidate_queries(claim, opt.mode, opt.cap, &idf);
  if (cands.empty()) {
    warn("claim " + claim.id + " has no candidates; flagged");
    return {};
  }
  return rank_candidates(model, claim, std::move(cands), store, vectors, seed, opt.features);
}

/// A keyword extractor under comparison: claim -> query terms.
struct KeywordMethod {
  std::string name;
  std::function<std::vector<std::string>(const Claim&)> extract;
};

/// The first two content tokens of the claim.
inline KeywordMethod first_tokens_baseline(std::size_t n = 2) {
  return {"first-" + std::to_string(n) + "-tokens", [n](const Claim& c) {
            auto t = preprocess(c.title);
            if (t.size() > n) t.resize(n);
            return t;
          }};
}

/// Statistical baseline: the n claim tokens with the highest corpus tf-idf.
inline KeywordMethod tfidf_baseline(const DocumentStore& store, std::size_t n = 2) {
  return {"tfidf-top-" + std::to_string(n), [&store, n](const Claim& c) {
            const auto tokens = preprocess(c.title);
            std::vector<std::string> distinct;
            for (const auto& t : tokens)
              if (std::find(distinct.begin(), distinct.end(), t) == distinct.end())
                distinct.push_back(t);
            const auto scores = tfidf_scores(distinct, tokens, store);
            std::stable_sort(distinct.begin(), distinct.end(),
                             [&](const auto& a, const auto& b) { return scores.at(a) > scores.at(b); });
            if (distinct.size() > n) distinct.resize(n);
            return distinct;
          }};
}

struct BaselineRow {
  std::string method;
  std::map<std::string, double> per_claim;  // claim id -> % valid results
  double mean_valid_pct = 0.0;
};

/// Percentage of a method's query hits that fall inside the claim's
/// reference set, the union of hits of its relevant labeled queries. A
/// query with no hits scores 0.
inline std::vector<BaselineRow> baseline_compare(const std::vector<Claim>& claims,
                                                 const LabelStore& labels,
                                                 const DocumentStore& store,
                                                 const std::vector<KeywordMethod>& methods,
                                                 const QueryOptions& scope = {}) {
  std::map<std::string, std::set<const Document*>> reference;
  for (const auto& c : claims)
    for (const auto& l : labels.for_claim(c.id))
      if (l.relevant)
        for (const Document* d : store.query(l.terms, scope)) reference[c.id].insert(d);

  std::vector<BaselineRow> table;
  for (const auto& m : methods) {
    BaselineRow row{m.name, {}, 0.0};
    double total = 0.0;
    for (const auto& c : claims) {
      if (!reference.count(c.id)) continue;
      const auto terms = m.extract(c);
      double pct = 0.0;
      if (!terms.empty()) {
        const Hits hits = store.query(terms, scope);
        if (!hits.empty()) {
          std::size_t valid = 0;
          for (const Document* d : hits) valid += reference[c.id].count(d);
          pct = 100.0 * static_cast<double>(valid) / static_cast<double>(hits.size());
        }
      }
      row.per_claim[c.id] = pct;
      total += pct;
    }
    row.mean_valid_pct = row.per_claim.empty() ? 0.0 : total / static_cast<double>(row.per_claim.size());
    table.push_back(std::move(row));
  }
  return table;
}

/// Wraps a trained ranker as a keyword method (top-ranked candidate).
inline KeywordMethod ltr_method(const RankerModel& model, const DocumentStore& store,
                                const WordVectors& vectors, std::uint64_t seed,
                                const SelectOptions& opt = {}) {
  return {"ltr", [&model, &store, &vectors, seed, opt](const Claim& c) {
            const auto ranked = select_keywords(model, c, store, vectors, seed, opt);
            return ranked.empty() ? std::vector<std::string>{} : ranked.front().candidate.terms;
          }};
}

}  // namespace contrail::ltr
