#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "contrail/common.hpp"
#include "contrail/corpus.hpp"

namespace contrail::analytics {

inline constexpr double kDaysPerMonth = 30.44;

/// Months between the earliest and latest hit; empty when there are none.
inline std::optional<double> lifespan_months(const Hits& hits) {
  if (hits.empty()) return std::nullopt;
  std::int64_t lo = hits.front()->timestamp, hi = lo;
  for (const Document* d : hits) {
    lo = std::min(lo, d->timestamp);
    hi = std::max(hi, d->timestamp);
  }
  return static_cast<double>(hi - lo) / (kDaysPerMonth * 86400.0);
}

inline std::map<Platform, double> lifespan_by_platform(const Hits& hits) {
  std::map<Platform, Hits> split;
  for (const Document* d : hits) split[d->platform].push_back(d);
  std::map<Platform, double> out;
  for (const auto& [p, h] : split) out[p] = *lifespan_months(h);
  return out;
}

/// Fraction of values strictly greater than x.
inline double ccdf_at(const std::vector<double>& values, double x) {
  if (values.empty()) return 0.0;
  const auto n = std::count_if(values.begin(), values.end(), [x](double v) { return v > x; });
  return static_cast<double>(n) / static_cast<double>(values.size());
}

struct CurvePoint {
  double x;
  double y;
};

/// CCDF evaluated at every distinct value.
inline std::vector<CurvePoint> ccdf_table(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<CurvePoint> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.push_back({values[i], static_cast<double>(values.size() - i - 1) / n});
  }
  return out;
}

struct KsResult {
  double d = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0, n2 = 0;
};

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}.
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.05) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, std::numeric_limits<double>::min(), 1.0);
}

/// Two-sample Kolmogorov-Smirnov test. D is exact over the pooled sample;
/// p uses the asymptotic distribution with n = n1 n2 / (n1 + n2).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error("KS test needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult r;
  r.d = d;
  r.n1 = a.size();
  r.n2 = b.size();
  r.p_value = kolmogorov_q(std::sqrt(na * nb / (na + nb)) * d);
  return r;
}

/// Group names used by the toxicity comparison.
namespace groups {
inline const std::string conspiracy_posts = "conspiracy-posts";
inline const std::string conspiracy_comments = "conspiracy-comments";
inline const std::string submission_comments = "submission-comments";
inline const std::string baseline_posts = "baseline-posts";
inline const std::string baseline_comments = "baseline-comments";
inline const std::string tweets = "tweets";
}  // namespace groups

/// The six comparisons reported for the toxicity analysis.
inline std::vector<std::pair<std::string, std::string>> named_comparisons() {
  using namespace groups;
  return {{conspiracy_posts, baseline_posts},        {conspiracy_comments, baseline_comments},
          {conspiracy_posts, conspiracy_comments},   {conspiracy_comments, submission_comments},
          {conspiracy_posts, tweets},                {conspiracy_comments, tweets}};
}

struct NamedSample {
  std::string name;
  std::vector<double> values;
};

struct KsRow {
  std::string a, b;
  KsResult result;
  bool flagged = false;
};

struct Distributions {
  std::vector<double> grid;
  std::map<std::string, std::vector<double>> cdf;  // group -> CDF on grid
  std::vector<KsRow> ks;

  std::string cdf_csv() const {
    std::string s = "x";
    for (const auto& [name, _] : cdf) s += "," + name + "_cdf," + name + "_ccdf";
    s += "\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      s += format_double(grid[i]);
      for (const auto& [_, c] : cdf) s += "," + format_double(c[i]) + "," + format_double(1.0 - c[i]);
      s += "\n";
    }
    return s;
  }

  std::string ks_csv() const {
    std::string s = "group_a,group_b,n1,n2,d,p_value,flagged\n";
    for (const auto& r : ks)
      s += r.a + "," + r.b + "," + std::to_string(r.result.n1) + "," + std::to_string(r.result.n2) +
           "," + format_double(r.result.d) + "," + format_double(r.result.p_value) + "," +
           (r.flagged ? "1" : "0") + "\n";
    return s;
  }
};

inline std::vector<double> empirical_cdf(std::vector<double> values, const std::vector<double>& grid) {
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  for (double x : grid)
    out.push_back(static_cast<double>(std::upper_bound(values.begin(), values.end(), x) - values.begin()) /
                  static_cast<double>(values.size()));
  return out;
}

/// CDFs on a shared grid of `points` evenly spaced values spanning the pooled
/// range, plus KS for every pair of non-empty groups.
inline Distributions emit_distributions(const std::vector<NamedSample>& samples,
                                        std::size_t points = 1000) {
  if (samples.empty()) throw Error("no score groups to compare");
  Distributions out;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : samples)
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  for (std::size_t i = 0; i < points; ++i)
    out.grid.push_back(points == 1 ? hi
                                   : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
  out.grid.back() = hi;
  for (const auto& s : samples)
    if (!s.values.empty()) out.cdf[s.name] = empirical_cdf(s.values, out.grid);
  const auto named = named_comparisons();
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      if (samples[i].values.empty() || samples[j].values.empty()) continue;
      KsRow row{samples[i].name, samples[j].name, ks_two_sample(samples[i].values, samples[j].values), false};
      for (const auto& [a, b] : named)
        if ((a == row.a && b == row.b) || (a == row.b && b == row.a)) row.flagged = true;
      out.ks.push_back(std::move(row));
    }
  return out;
}

/// Uniform sample without replacement of `n` documents of `kind` from the
/// given communities.
inline Hits baseline_sample(const DocumentStore& store, const std::vector<std::string>& communities,
                            Kind kind, std::size_t n, std::uint64_t seed) {
  const std::set<std::string> allowed(communities.begin(), communities.end());
  Hits pool;
  for (const auto& d : store.documents())
    if (d.kind == kind && allowed.count(d.community)) pool.push_back(&d);
  if (n >= pool.size()) return pool;
  Rng rng(seed);
  Hits out;
  for (std::size_t i : sample_without_replacement(pool.size(), n, rng)) out.push_back(pool[i]);
  return out;
}

/// Comments under matched posts, whether or not they contain the keywords.
inline Hits submission_comments(const DocumentStore& store, const Hits& hits) {
  Hits out;
  std::set<const Document*> seen;
  for (const Document* d : hits) {
    if (d->kind != Kind::post) continue;
    for (const Document* c : store.children(d->id))
      if (c->kind == Kind::comment && seen.insert(c).second) out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [&](const Document* a, const Document* b) {
    return store.index_of(a) < store.index_of(b);
  });
  return out;
}

}  // namespace contrail::analytics
