#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "contrail/ltr/dataset.hpp"

namespace contrail::ltr {

/// Per-feature z-score transform. Sentinel values are treated as ordinary
/// numbers. Constant features get unit scale.
struct Standardizer {
  std::array<double, kNumFeatures> mean{};
  std::array<double, kNumFeatures> scale{};

  Standardizer() { scale.fill(1.0); }

  static Standardizer fit(const std::vector<const Row*>& rows) {
    Standardizer s;
    if (rows.empty()) return s;
    const double n = static_cast<double>(rows.size());
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      double m = 0.0;
      for (const Row* r : rows) m += r->features[f];
      m /= n;
      double v = 0.0;
      for (const Row* r : rows) v += (r->features[f] - m) * (r->features[f] - m);
      v /= n;
      s.mean[f] = m;
      s.scale[f] = v > 1e-24 ? std::sqrt(v) : 1.0;
    }
    return s;
  }

  static Standardizer fit(const RankingDataset& ds) {
    std::vector<const Row*> rows;
    for (const auto& g : ds.groups)
      for (const auto& r : g.rows) rows.push_back(&r);
    return fit(rows);
  }

  std::array<double, kNumFeatures> apply(const FeatureVector& x) const {
    std::array<double, kNumFeatures> out{};
    for (std::size_t f = 0; f < kNumFeatures; ++f) out[f] = (x[f] - mean[f]) / scale[f];
    return out;
  }
};

struct NearMissOptions {
  std::size_t shortlist_m = 3;  // nearest negatives per positive in stage one
  std::size_t k = 3;            // nearest positives averaged in stage two
};

/// NearMiss-3 undersampling of one query group.
///
/// Stage one shortlists, for every positive row, its `shortlist_m` nearest
/// negatives. Stage two keeps the shortlisted negatives with the largest mean
/// distance to their `k` nearest positives, as many as there are positives.
/// Positives are always kept; output preserves input row order. Distance ties
/// resolve to the lower row index.
inline QueryGroup nearmiss3(const QueryGroup& group, const NearMissOptions& opt = {},
                            const Standardizer& standardizer = {}) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < group.rows.size(); ++i)
    (group.rows[i].label == 1 ? pos : neg).push_back(i);
  if (neg.empty() || pos.empty()) return group;

  std::vector<std::array<double, kNumFeatures>> z;
  for (const auto& r : group.rows) z.push_back(standardizer.apply(r.features));
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t f = 0; f < kNumFeatures; ++f) s += (z[a][f] - z[b][f]) * (z[a][f] - z[b][f]);
    return std::sqrt(s);
  };
  // indices sorted by (distance to `from`, index), truncated to `count`
  auto nearest = [&](std::size_t from, std::vector<std::size_t> candidates, std::size_t count) {
    std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
      const double da = dist(from, a), db = dist(from, b);
      if (da != db) return da < db;
      return a < b;
    });
    if (candidates.size() > count) candidates.resize(count);
    return candidates;
  };

  std::set<std::size_t> shortlist;
  for (std::size_t p : pos)
    for (std::size_t n : nearest(p, neg, opt.shortlist_m)) shortlist.insert(n);

  struct Scored {
    std::size_t idx;
    double mean_dist;
  };
  std::vector<Scored> scored;
  for (std::size_t n : shortlist) {
    const auto near_pos = nearest(n, pos, opt.k);
    double s = 0.0;
    for (std::size_t p : near_pos) s += dist(n, p);
    scored.push_back({n, s / static_cast<double>(near_pos.size())});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.mean_dist != b.mean_dist) return a.mean_dist > b.mean_dist;
    return a.idx < b.idx;
  });
  const std::size_t keep = std::min(pos.size(), scored.size());
  std::set<std::size_t> kept(pos.begin(), pos.end());
  for (std::size_t i = 0; i < keep; ++i) kept.insert(scored[i].idx);

  QueryGroup out{group.qid, {}};
  for (std::size_t i : kept) out.rows.push_back(group.rows[i]);
  return out;
}

/// Applies nearmiss3 to every group with a standardizer fit on the whole set.
inline RankingDataset undersample(const RankingDataset& ds, const NearMissOptions& opt = {}) {
  const Standardizer s = Standardizer::fit(ds);
  RankingDataset out;
  for (const auto& g : ds.groups) out.groups.push_back(nearmiss3(g, opt, s));
  return out;
}

}  // namespace contrail::ltr
