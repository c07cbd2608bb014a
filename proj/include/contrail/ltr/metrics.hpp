#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "contrail/common.hpp"
#include "contrail/ltr/dataset.hpp"

namespace contrail::ltr {

/// Average precision of binary labels listed in ranked order. Zero when the
/// ranking holds no relevant item.
inline double average_precision(std::span<const int> ranked_labels) {
  double hits = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < ranked_labels.size(); ++i) {
    if (ranked_labels[i] == 1) {
      hits += 1.0;
      sum += hits / static_cast<double>(i + 1);
    }
  }
  return hits == 0.0 ? 0.0 : sum / hits;
}

/// Row order by descending score, ties broken by the lexical term key.
inline std::vector<std::size_t> rank_order(const std::vector<double>& scores,
                                           const std::vector<std::string>& keys) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return a < b;
  });
  return order;
}

inline double group_average_precision(const QueryGroup& g, const std::vector<double>& scores) {
  std::vector<std::string> keys;
  for (const auto& r : g.rows) keys.push_back(r.terms);
  std::vector<int> ranked;
  for (std::size_t i : rank_order(scores, keys)) ranked.push_back(g.rows[i].label);
  return average_precision(ranked);
}

/// MAP of any scorer exposing `double score(const FeatureVector&) const`.
/// Groups without a positive row are skipped with a warning.
template <typename Scorer>
double mean_average_precision(const Scorer& model, const RankingDataset& ds) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& g : ds.groups) {
    if (g.positives() == 0) {
      warn("group " + g.qid + " has no relevant row; excluded from MAP");
      continue;
    }
    std::vector<double> scores;
    for (const auto& r : g.rows) scores.push_back(model.score(r.features));
    sum += group_average_precision(g, scores);
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

}  // namespace contrail::ltr
