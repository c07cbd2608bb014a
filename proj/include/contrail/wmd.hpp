#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "contrail/common.hpp"

namespace contrail {

/// Dense word vectors of a fixed dimension.
class WordVectors {
 public:
  WordVectors() = default;
  explicit WordVectors(std::size_t dimension) : dim_(dimension) {}

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return vecs_.size(); }
  bool contains(const std::string& w) const { return vecs_.count(w) > 0; }

  const std::vector<double>* find(const std::string& w) const {
    auto it = vecs_.find(w);
    return it == vecs_.end() ? nullptr : &it->second;
  }

  const std::vector<double>& at(const std::string& w) const {
    auto it = vecs_.find(w);
    if (it == vecs_.end()) throw Error("word not in vocabulary: " + w);
    return it->second;
  }

  void set(const std::string& word, std::vector<double> v) {
    if (dim_ == 0 && vecs_.empty()) dim_ = v.size();
    if (v.size() != dim_) throw Error("vector dimension mismatch for word: " + word);
    for (double x : v)
      if (!std::isfinite(x)) throw Error("non-finite vector component for word: " + word);
    if (!vecs_.count(word)) order_.push_back(word);
    vecs_[word] = std::move(v);
  }

  /// Words in insertion order.
  const std::vector<std::string>& words() const { return order_; }

  /// word2vec text format: "V d" header, then "token v1 ... vd" per line.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write vectors file: " + path);
    out << order_.size() << ' ' << dim_ << '\n';
    for (const auto& w : order_) {
      out << w;
      for (double x : vecs_.at(w)) out << ' ' << format_double(x);
      out << '\n';
    }
  }

  static WordVectors load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read vectors file: " + path);
    std::size_t count = 0, dim = 0;
    if (!(in >> count >> dim) || dim == 0) throw Error("bad word2vec header in " + path);
    WordVectors wv(dim);
    for (std::size_t i = 0; i < count; ++i) {
      std::string word;
      if (!(in >> word)) throw Error("truncated word2vec file: " + path);
      std::vector<double> v(dim);
      for (auto& x : v)
        if (!(in >> x)) throw Error("truncated vector for '" + word + "' in " + path);
      wv.set(word, std::move(v));
    }
    return wv;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vecs_;
  std::vector<std::string> order_;
};

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Minimum-cost transportation between two histograms of equal total mass.
/// cost is row-major, supply.size() x demand.size(). Solved by successive
/// shortest augmenting paths (Bellman-Ford on the residual graph).
inline double transport_cost(std::span<const double> supply, std::span<const double> demand,
                             std::span<const double> cost) {
  const std::size_t n = supply.size(), m = demand.size();
  const std::size_t source = 0, sink = n + m + 1, nodes = n + m + 2;
  struct Edge {
    std::size_t to;
    double cap;
    double cost;
    std::size_t rev;
  };
  std::vector<std::vector<Edge>> g(nodes);
  auto add_edge = [&](std::size_t u, std::size_t v, double cap, double c) {
    g[u].push_back({v, cap, c, g[v].size()});
    g[v].push_back({u, 0.0, -c, g[u].size() - 1});
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    add_edge(source, 1 + i, supply[i], 0.0);
    total += supply[i];
  }
  for (std::size_t j = 0; j < m; ++j) add_edge(1 + n + j, sink, demand[j], 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) add_edge(1 + i, 1 + n + j, kInf, cost[i * m + j]);

  constexpr double kEps = 1e-15;
  double flow = 0.0, result = 0.0;
  std::vector<double> dist(nodes);
  std::vector<std::size_t> prev_node(nodes), prev_edge(nodes);
  const std::size_t max_rounds = 4 * (n + m + 2) * (n + m + 2);
  for (std::size_t round = 0; round < max_rounds && flow < total - 1e-13; ++round) {
    std::fill(dist.begin(), dist.end(), kInf);
    dist[source] = 0.0;
    for (std::size_t pass = 0; pass + 1 < nodes; ++pass) {
      bool changed = false;
      for (std::size_t u = 0; u < nodes; ++u) {
        if (dist[u] == kInf) continue;
        for (std::size_t k = 0; k < g[u].size(); ++k) {
          const Edge& e = g[u][k];
          if (e.cap > kEps && dist[u] + e.cost < dist[e.to] - 1e-15) {
            dist[e.to] = dist[u] + e.cost;
            prev_node[e.to] = u;
            prev_edge[e.to] = k;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[sink] == kInf) break;
    double push = kInf;
    for (std::size_t v = sink; v != source; v = prev_node[v])
      push = std::min(push, g[prev_node[v]][prev_edge[v]].cap);
    for (std::size_t v = sink; v != source; v = prev_node[v]) {
      Edge& e = g[prev_node[v]][prev_edge[v]];
      e.cap -= push;
      g[v][e.rev].cap += push;
    }
    flow += push;
    result += push * dist[sink];
  }
  return std::max(0.0, result);
}

enum class WmdMethod { exact, relaxed, automatic };

/// Above this many distinct in-vocabulary tokens on either side, automatic
/// mode uses the relaxed bound.
inline constexpr std::size_t kExactWmdTokenLimit = 25;

namespace detail {

struct BagOfWords {
  std::vector<const std::vector<double>*> vecs;
  std::vector<double> weights;
};

inline BagOfWords normalized_bag(std::span<const std::string> tokens, const WordVectors& wv) {
  std::map<std::string, double> counts;
  double total = 0.0;
  for (const auto& t : tokens) {
    if (wv.contains(t)) {
      counts[t] += 1.0;
      total += 1.0;
    }
  }
  BagOfWords bag;
  for (const auto& [w, c] : counts) {
    bag.vecs.push_back(wv.find(w));
    bag.weights.push_back(c / total);
  }
  return bag;
}

}  // namespace detail

/// Word Mover's Distance between two token multisets. Out-of-vocabulary tokens
/// are dropped; throws Error("empty-after-OOV") if a side has none left.
inline double wmd(std::span<const std::string> doc_a, std::span<const std::string> doc_b,
                  const WordVectors& vectors, WmdMethod method = WmdMethod::automatic) {
  const auto a = detail::normalized_bag(doc_a, vectors);
  const auto b = detail::normalized_bag(doc_b, vectors);
  if (a.weights.empty() || b.weights.empty()) throw Error("empty-after-OOV");
  const std::size_t n = a.weights.size(), m = b.weights.size();
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = euclidean(*a.vecs[i], *b.vecs[j]);

  if (method == WmdMethod::automatic)
    method = (n > kExactWmdTokenLimit || m > kExactWmdTokenLimit) ? WmdMethod::relaxed
                                                                  : WmdMethod::exact;
  if (method == WmdMethod::exact) return transport_cost(a.weights, b.weights, cost);

  // relaxed: each side moves all its mass to its nearest word on the other side
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) best = std::min(best, cost[i * m + j]);
    lhs += a.weights[i] * best;
  }
  for (std::size_t j = 0; j < m; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) best = std::min(best, cost[i * m + j]);
    rhs += b.weights[j] * best;
  }
  return std::max(lhs, rhs);
}

inline double wmd(const std::vector<std::string>& doc_a, const std::vector<std::string>& doc_b,
                  const WordVectors& vectors, WmdMethod method = WmdMethod::automatic) {
  return wmd(std::span<const std::string>(doc_a), std::span<const std::string>(doc_b), vectors,
             method);
}

/// Maps a distance in [0, inf) to a similarity in (0, 1].
inline double distance_to_similarity(double d) { return 1.0 / (1.0 + d); }

}  // namespace contrail
