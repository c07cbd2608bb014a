#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "contrail/claims.hpp"
#include "contrail/common.hpp"
#include "contrail/corpus.hpp"

namespace contrail::hawkes {

using Matrix = std::vector<std::vector<double>>;

inline Matrix zeros(std::size_t k) { return Matrix(k, std::vector<double>(k, 0.0)); }

inline constexpr double kSecondsPerDay = 86400.0;

/// One point process per community; times in days from the claim's first event.
struct EventSeries {
  std::string claim_id;
  std::vector<std::string> processes;
  std::vector<std::vector<double>> events;
  double horizon = 0.0;
  std::int64_t origin = 0;  // epoch seconds of time zero

  std::size_t dimension() const { return processes.size(); }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& e : events) n += e.size();
    return n;
  }
  std::size_t nonempty() const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [](const auto& e) { return !e.empty(); }));
  }
  bool fittable() const { return dimension() >= 2 && nonempty() >= 2; }

  json to_json() const {
    return {{"claim_id", claim_id}, {"processes", processes}, {"events", events},
            {"horizon", horizon},   {"origin", origin}};
  }
};

/// Each hit becomes one event in its community's process. Hits from
/// communities outside the list are dropped. T = last event + 1 day.
inline EventSeries build_series(const std::string& claim_id, const Hits& hits,
                                const std::vector<std::string>& communities) {
  EventSeries s;
  s.claim_id = claim_id;
  s.processes = communities;
  s.events.assign(communities.size(), {});
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < communities.size(); ++i) index[communities[i]] = i;
  std::vector<const Document*> kept;
  for (const Document* d : hits)
    if (index.count(d->community)) kept.push_back(d);
  if (kept.empty()) return s;
  s.origin = (*std::min_element(kept.begin(), kept.end(), [](auto a, auto b) {
               return a->timestamp < b->timestamp;
             }))->timestamp;
  double last = 0.0;
  for (const Document* d : kept) {
    const double t = static_cast<double>(d->timestamp - s.origin) / kSecondsPerDay;
    s.events[index[d->community]].push_back(t);
    last = std::max(last, t);
  }
  for (auto& e : s.events) std::sort(e.begin(), e.end());
  s.horizon = last + 1.0;
  return s;
}

struct HawkesParams {
  std::vector<double> mu;
  Matrix W;  // W[i][j]: expected direct offspring in j of one event in i
  double beta = 1.0;

  std::size_t dimension() const { return mu.size(); }

  double spectral_radius() const {
    const auto k = static_cast<Eigen::Index>(mu.size());
    Eigen::MatrixXd m(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j)
        m(i, j) = W[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m.eigenvalues().cwiseAbs().maxCoeff();
  }

  /// Stationary rates (I - W^T)^-1 mu.
  std::vector<double> stationary_rates() const {
    const auto k = static_cast<Eigen::Index>(mu.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(k, k);
    Eigen::VectorXd m(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      m(i) = mu[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < k; ++j)
        a(i, j) -= W[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd r = a.partialPivLu().solve(m);
    return std::vector<double>(r.data(), r.data() + r.size());
  }

  void validate() const {
    const std::size_t k = mu.size();
    if (W.size() != k) throw Error("weight matrix must be K x K");
    for (std::size_t i = 0; i < k; ++i) {
      if (W[i].size() != k) throw Error("weight matrix must be K x K");
      if (!std::isfinite(mu[i]) || mu[i] < 0) throw Error("background rates must be finite and >= 0");
      for (double w : W[i])
        if (!std::isfinite(w) || w < 0) throw Error("weights must be finite and >= 0");
    }
    if (!(beta > 0) || !std::isfinite(beta)) throw Error("beta must be positive");
  }

  json to_json() const { return {{"mu", mu}, {"W", W}, {"beta", beta}}; }
  static HawkesParams from_json(const json& j) {
    HawkesParams p{j.at("mu").get<std::vector<double>>(), j.at("W").get<Matrix>(),
                   j.at("beta").get<double>()};
    p.validate();
    return p;
  }
};

/// Event stream merged across processes, ordered by time then process.
struct Event {
  double t;
  std::size_t c;
};

inline std::vector<Event> merged_events(const EventSeries& s) {
  std::vector<Event> ev;
  for (std::size_t c = 0; c < s.events.size(); ++c)
    for (double t : s.events[c]) ev.push_back({t, c});
  std::stable_sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.c < b.c;
  });
  return ev;
}

/// Exact log-likelihood under the exponential kernel.
inline double log_likelihood(const HawkesParams& p, const EventSeries& s) {
  const std::size_t k = p.dimension();
  const auto ev = merged_events(s);
  std::vector<double> excite(k, 0.0);  // sum over past events of i of beta e^{-beta dt}
  double prev = 0.0, ll = 0.0;
  for (const auto& e : ev) {
    const double decay = std::exp(-p.beta * (e.t - prev));
    for (auto& x : excite) x *= decay;
    prev = e.t;
    double rate = p.mu[e.c];
    for (std::size_t i = 0; i < k; ++i) rate += p.W[i][e.c] * excite[i];
    ll += std::log(std::max(rate, 1e-300));
    excite[e.c] += p.beta;
  }
  for (std::size_t j = 0; j < k; ++j) ll -= p.mu[j] * s.horizon;
  for (const auto& e : ev) {
    double out = 0.0;
    for (std::size_t j = 0; j < k; ++j) out += p.W[e.c][j];
    ll -= out * (1.0 - std::exp(-p.beta * (s.horizon - e.t)));
  }
  return ll;
}

struct SimulateOptions {
  std::vector<Event> initial;  // seeded immigrants, e.g. for cascade checks
  std::vector<std::string> names;
};

/// Ogata thinning. The intensity only decays between events, so its value
/// right after the last event bounds it until the next one.
inline EventSeries simulate(const HawkesParams& p, double horizon, std::uint64_t seed,
                            const SimulateOptions& opt = {}) {
  p.validate();
  const std::size_t k = p.dimension();
  if (k == 0) throw Error("simulation needs at least one process");
  if (p.spectral_radius() >= 1.0) throw Error("unstable weight matrix: spectral radius >= 1");
  if (!(horizon > 0)) throw Error("horizon must be positive");

  EventSeries s;
  s.processes = opt.names;
  for (std::size_t i = s.processes.size(); i < k; ++i) s.processes.push_back("p" + std::to_string(i));
  s.events.assign(k, {});
  s.horizon = horizon;

  std::vector<double> out_weight(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (double w : p.W[i]) out_weight[i] += w;

  auto initial = opt.initial;
  std::sort(initial.begin(), initial.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  std::size_t next_initial = 0;

  Rng rng(seed);
  std::vector<double> excite(k, 0.0);
  double t = 0.0, mu_total = 0.0;
  for (double m : p.mu) mu_total += m;
  auto advance = [&](double to) {
    const double decay = std::exp(-p.beta * (to - t));
    for (auto& x : excite) x *= decay;
    t = to;
  };
  auto record = [&](std::size_t c) {
    s.events[c].push_back(t);
    excite[c] += p.beta;
  };
  while (true) {
    double bound = mu_total;
    for (std::size_t i = 0; i < k; ++i) bound += out_weight[i] * excite[i];
    const double forced = next_initial < initial.size() ? initial[next_initial].t : horizon;
    if (bound <= 0.0) {
      if (next_initial >= initial.size()) break;
      advance(forced);
      record(initial[next_initial++].c);
      continue;
    }
    const double cand = t + rng.exponential(bound);
    if (cand >= forced) {
      if (next_initial >= initial.size()) break;
      advance(forced);
      record(initial[next_initial++].c);
      continue;
    }
    advance(cand);
    std::vector<double> rate(k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      rate[j] = p.mu[j];
      for (std::size_t i = 0; i < k; ++i) rate[j] += p.W[i][j] * excite[i];
      total += rate[j];
    }
    double u = rng.uniform() * bound;
    if (u >= total) continue;  // thinned
    std::size_t c = 0;
    while (c + 1 < k && u >= rate[c]) u -= rate[c++];
    record(c);
  }
  return s;
}

struct Priors {
  double mu_shape = 1.0, mu_rate = 1.0;
  double w_shape = 1.0, w_rate = 1.0;
};

struct GibbsOptions {
  Priors priors;
  std::vector<double> beta_grid{0.5, 1.0, 2.0, 4.0, 8.0};
  std::size_t iters = 2000;
  std::size_t burn_in = 500;
  std::uint64_t seed = 1;
  double kernel_cutoff = 1e-12;  // parents whose kernel mass is below this are skipped
  double drift_threshold = 0.05;
};

/// Attribution counts from one sweep of the sampler.
struct Attribution {
  Matrix ancestor;  // [i][j]: events in j whose root ancestor is in i
  Matrix direct;    // [i][j]: events in j whose parent is in i
  std::vector<double> background;
};

struct GibbsSample {
  HawkesParams params;
  Attribution attribution;
};

struct GibbsResult {
  HawkesParams mean;
  std::vector<GibbsSample> samples;  // post burn-in
  std::map<double, std::size_t> beta_counts;
  double drift = 0.0;
  bool converged = true;
  double log_likelihood = 0.0;

  json diagnostics() const {
    json bc = json::object();
    for (const auto& [b, n] : beta_counts) bc[format_double(b)] = n;
    return {{"samples", samples.size()}, {"beta_counts", bc}, {"drift", drift},
            {"converged", converged},     {"log_likelihood", log_likelihood}};
  }
};

/// Parent distribution of event n: entry 0 is the background, entry r + 1
/// the r-th candidate in `cand` (indices of earlier events). Sums to 1.
inline std::vector<double> parent_probabilities(const std::vector<Event>& ev, std::size_t n,
                                                const std::vector<std::size_t>& cand,
                                                const HawkesParams& p) {
  std::vector<double> w(cand.size() + 1);
  w[0] = p.mu[ev[n].c];
  double total = w[0];
  for (std::size_t r = 0; r < cand.size(); ++r) {
    const Event& m = ev[cand[r]];
    w[r + 1] = p.W[m.c][ev[n].c] * p.beta * std::exp(-p.beta * (ev[n].t - m.t));
    total += w[r + 1];
  }
  if (total <= 0.0) {
    std::fill(w.begin(), w.end(), 0.0);
    w[0] = 1.0;
    return w;
  }
  for (auto& x : w) x /= total;
  return w;
}

/// Earlier events within the kernel window of event n for decay rate beta.
inline std::vector<std::size_t> parent_candidates(const std::vector<Event>& ev, std::size_t n,
                                                  double beta, double cutoff) {
  const double window = -std::log(cutoff) / beta;
  std::vector<std::size_t> out;
  for (std::size_t m = n; m-- > 0;) {
    if (ev[n].t - ev[m].t > window) break;
    if (ev[m].t < ev[n].t) out.push_back(m);
  }
  return out;
}

inline Attribution attribute(const std::vector<Event>& ev, const std::vector<long>& parent,
                             std::size_t k) {
  Attribution a{zeros(k), zeros(k), std::vector<double>(k, 0.0)};
  std::vector<std::size_t> root(ev.size());
  for (std::size_t n = 0; n < ev.size(); ++n) {
    if (parent[n] < 0) {
      root[n] = n;
      a.background[ev[n].c] += 1.0;
      continue;
    }
    const auto par = static_cast<std::size_t>(parent[n]);
    root[n] = root[par];
    a.direct[ev[par].c][ev[n].c] += 1.0;
    a.ancestor[ev[root[n]].c][ev[n].c] += 1.0;
  }
  return a;
}

/// Branching-structure Gibbs sampler with conjugate gamma updates and a
/// gridded decay rate.
inline GibbsResult fit_gibbs(const EventSeries& s, const GibbsOptions& opt = {}) {
  if (!s.fittable()) throw Error("series for claim '" + s.claim_id + "' is not fittable");
  if (opt.iters <= opt.burn_in) throw Error("iters must exceed burn_in");
  if (opt.beta_grid.empty()) throw Error("beta grid must be non-empty");
  const std::size_t k = s.dimension();
  const auto ev = merged_events(s);
  const std::size_t n_ev = ev.size();
  const double T = s.horizon;
  Rng rng(opt.seed);

  HawkesParams p;
  p.mu.resize(k);
  for (std::size_t j = 0; j < k; ++j)
    p.mu[j] = std::max(static_cast<double>(s.events[j].size()) / (2.0 * T), 1e-3);
  p.W.assign(k, std::vector<double>(k, 0.1));
  p.beta = opt.beta_grid[opt.beta_grid.size() / 2];

  std::vector<std::size_t> count(k, 0);
  for (const auto& e : ev) ++count[e.c];

  GibbsResult res;
  res.mean.mu.assign(k, 0.0);
  res.mean.W = zeros(k);
  res.mean.beta = 0.0;
  std::vector<long> parent(n_ev, -1);
  std::vector<double> trace;

  for (std::size_t it = 0; it < opt.iters; ++it) {
    // 1. parents
    for (std::size_t n = 0; n < n_ev; ++n) {
      const auto cand = parent_candidates(ev, n, p.beta, opt.kernel_cutoff);
      const auto prob = parent_probabilities(ev, n, cand, p);
      double u = rng.uniform(), acc = 0.0;
      std::size_t pick = prob.size() - 1;
      for (std::size_t r = 0; r < prob.size(); ++r) {
        acc += prob[r];
        if (u < acc) {
          pick = r;
          break;
        }
      }
      parent[n] = pick == 0 ? -1 : static_cast<long>(cand[pick - 1]);
    }
    auto attribution = attribute(ev, parent, k);

    // 2. background rates
    for (std::size_t j = 0; j < k; ++j)
      p.mu[j] = rng.gamma(opt.priors.mu_shape + attribution.background[j], opt.priors.mu_rate + T);

    // 3. weights: exposure of source i is the kernel mass inside [0, T]
    std::vector<double> exposure(k, 0.0);
    for (const auto& e : ev) exposure[e.c] += 1.0 - std::exp(-p.beta * (T - e.t));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        p.W[i][j] = rng.gamma(opt.priors.w_shape + attribution.direct[i][j],
                              opt.priors.w_rate + exposure[i]);

    // 4. decay rate on the grid, conditional on parents and weights
    std::vector<double> logp(opt.beta_grid.size(), 0.0);
    std::vector<double> out_weight(k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      for (double w : p.W[i]) out_weight[i] += w;
    for (std::size_t g = 0; g < opt.beta_grid.size(); ++g) {
      const double b = opt.beta_grid[g];
      double lp = 0.0;
      for (std::size_t n = 0; n < n_ev; ++n) {
        if (parent[n] >= 0)
          lp += std::log(b) - b * (ev[n].t - ev[static_cast<std::size_t>(parent[n])].t);
        lp -= out_weight[ev[n].c] * (1.0 - std::exp(-b * (T - ev[n].t)));
      }
      logp[g] = lp;
    }
    const double top = *std::max_element(logp.begin(), logp.end());
    double z = 0.0;
    for (auto& l : logp) z += (l = std::exp(l - top));
    double u = rng.uniform() * z;
    std::size_t g = 0;
    while (g + 1 < logp.size() && u >= logp[g]) u -= logp[g++];
    p.beta = opt.beta_grid[g];

    if (it >= opt.burn_in) {
      res.samples.push_back({p, std::move(attribution)});
      ++res.beta_counts[p.beta];
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        total += p.mu[i];
        for (double w : p.W[i]) total += w;
      }
      trace.push_back(total);
    }
  }

  const double ns = static_cast<double>(res.samples.size());
  for (const auto& smp : res.samples) {
    for (std::size_t i = 0; i < k; ++i) {
      res.mean.mu[i] += smp.params.mu[i] / ns;
      for (std::size_t j = 0; j < k; ++j) res.mean.W[i][j] += smp.params.W[i][j] / ns;
    }
    res.mean.beta += smp.params.beta / ns;
  }
  // running-mean drift across the last quarter of the kept chain
  const std::size_t q = trace.size() - trace.size() / 4;
  double head = 0.0, all = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    all += trace[i];
    if (i < q) head += trace[i];
  }
  const double m_head = head / static_cast<double>(std::max<std::size_t>(q, 1));
  const double m_all = all / static_cast<double>(trace.size());
  res.drift = m_all > 0 ? std::abs(m_all - m_head) / m_all : 0.0;
  res.converged = res.drift <= opt.drift_threshold;
  if (!res.converged)
    warn("claim " + s.claim_id + ": sampler drift " + format_double(res.drift) + " exceeds threshold");
  res.log_likelihood = log_likelihood(res.mean, s);
  return res;
}

enum class AttributionMode { ancestor, direct };

struct InfluenceMatrix {
  std::vector<std::string> processes;
  Matrix raw;
  std::vector<double> background;
  std::vector<double> totals;
  std::vector<std::vector<std::optional<double>>> normalized;  // percent, nullopt = no source events
  std::vector<std::optional<double>> external;

  void finalize() {
    const std::size_t k = processes.size();
    normalized.assign(k, std::vector<std::optional<double>>(k));
    external.assign(k, std::nullopt);
    for (std::size_t i = 0; i < k; ++i) {
      if (totals[i] <= 0.0) continue;
      double ext = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        normalized[i][j] = raw[i][j] / totals[i] * 100.0;
        if (j != i) ext += *normalized[i][j];
      }
      external[i] = ext;
    }
  }

  std::string to_csv() const {
    std::string s = "source,target,raw,normalized\n";
    for (std::size_t i = 0; i < processes.size(); ++i)
      for (std::size_t j = 0; j < processes.size(); ++j)
        s += processes[i] + "," + processes[j] + "," + format_double(raw[i][j]) + "," +
             (normalized[i][j] ? format_double(*normalized[i][j]) : std::string("NA")) + "\n";
    return s;
  }
};

/// Influence from posterior attribution samples: mean counts per sample.
inline InfluenceMatrix influence(const GibbsResult& fit, const EventSeries& s,
                                 AttributionMode mode = AttributionMode::ancestor) {
  const std::size_t k = s.dimension();
  InfluenceMatrix m{s.processes, zeros(k), std::vector<double>(k, 0.0), {}, {}, {}};
  for (const auto& e : s.events) m.totals.push_back(static_cast<double>(e.size()));
  const double ns = static_cast<double>(fit.samples.size());
  for (const auto& smp : fit.samples) {
    const auto& src = mode == AttributionMode::ancestor ? smp.attribution.ancestor : smp.attribution.direct;
    for (std::size_t i = 0; i < k; ++i) {
      m.background[i] += smp.attribution.background[i] / ns;
      for (std::size_t j = 0; j < k; ++j) m.raw[i][j] += src[i][j] / ns;
    }
  }
  m.finalize();
  return m;
}

/// Influence from fixed parameters: expected attribution under the parent
/// distribution, with root probabilities propagated in time order.
inline InfluenceMatrix influence(const HawkesParams& p, const EventSeries& s,
                                 AttributionMode mode = AttributionMode::ancestor,
                                 double cutoff = 1e-12) {
  const std::size_t k = s.dimension();
  const auto ev = merged_events(s);
  InfluenceMatrix m{s.processes, zeros(k), std::vector<double>(k, 0.0), {}, {}, {}};
  for (const auto& e : s.events) m.totals.push_back(static_cast<double>(e.size()));
  std::vector<std::vector<double>> root(ev.size(), std::vector<double>(k, 0.0));
  for (std::size_t n = 0; n < ev.size(); ++n) {
    const auto cand = parent_candidates(ev, n, p.beta, cutoff);
    const auto prob = parent_probabilities(ev, n, cand, p);
    m.background[ev[n].c] += prob[0];
    root[n][ev[n].c] += prob[0];
    for (std::size_t r = 0; r < cand.size(); ++r) {
      const std::size_t par = cand[r];
      if (mode == AttributionMode::direct) m.raw[ev[par].c][ev[n].c] += prob[r + 1];
      for (std::size_t i = 0; i < k; ++i) {
        root[n][i] += prob[r + 1] * root[par][i];
        if (mode == AttributionMode::ancestor) m.raw[i][ev[n].c] += prob[r + 1] * root[par][i];
      }
    }
  }
  m.finalize();
  return m;
}

/// Drops `community` from claims published inside [from, to] (ISO dates).
struct Exclusion {
  std::string community;
  std::string from;
  std::string to;

  bool applies(const Claim& c) const {
    return !c.published.empty() && c.published >= from && c.published <= to;
  }
};

struct AggregateOptions {
  std::optional<std::string> topic;
  std::vector<Exclusion> exclusions;
};

/// Community-level aggregate: raw counts and source totals summed over the
/// selected claims, then normalized.
inline InfluenceMatrix aggregate_influence(const std::vector<std::string>& communities,
                                           const std::vector<Claim>& claims,
                                           const std::map<std::string, InfluenceMatrix>& per_claim,
                                           const AggregateOptions& opt = {}) {
  const std::size_t k = communities.size();
  InfluenceMatrix agg{communities, zeros(k), std::vector<double>(k, 0.0),
                      std::vector<double>(k, 0.0), {}, {}};
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < k; ++i) index[communities[i]] = i;
  std::size_t used = 0;
  for (const auto& c : claims) {
    if (opt.topic && !c.has_topic(*opt.topic)) continue;
    auto it = per_claim.find(c.id);
    if (it == per_claim.end()) continue;
    const auto& m = it->second;
    std::vector<bool> drop(m.processes.size(), false);
    for (std::size_t i = 0; i < m.processes.size(); ++i)
      for (const auto& ex : opt.exclusions)
        if (ex.community == m.processes[i] && ex.applies(c)) drop[i] = true;
    ++used;
    for (std::size_t i = 0; i < m.processes.size(); ++i) {
      auto a = index.find(m.processes[i]);
      if (a == index.end() || drop[i]) continue;
      agg.totals[a->second] += m.totals[i];
      agg.background[a->second] += m.background[i];
      for (std::size_t j = 0; j < m.processes.size(); ++j) {
        auto b = index.find(m.processes[j]);
        if (b == index.end() || drop[j]) continue;
        agg.raw[a->second][b->second] += m.raw[i][j];
      }
    }
  }
  if (used == 0) throw Error("no claims selected for influence aggregation");
  agg.finalize();
  return agg;
}

}  // namespace contrail::hawkes
