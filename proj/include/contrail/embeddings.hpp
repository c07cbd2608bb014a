#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "contrail/common.hpp"
#include "contrail/wmd.hpp"

namespace contrail {

struct SkipGramParams {
  std::size_t dim = 100;
  std::size_t window = 5;
  std::size_t negative = 5;
  std::size_t min_count = 2;
  std::size_t epochs = 15;
  double alpha = 0.025;
  double min_alpha = 0.0001;
  std::uint64_t seed = 1;

  json to_json() const {
    return {{"dim", dim},         {"window", window}, {"negative", negative},
            {"min_count", min_count}, {"epochs", epochs}, {"alpha", alpha},
            {"min_alpha", min_alpha}, {"seed", seed}};
  }
  static SkipGramParams from_json(const json& j) {
    SkipGramParams p;
    p.dim = j.value("dim", p.dim);
    p.window = j.value("window", p.window);
    p.negative = j.value("negative", p.negative);
    p.min_count = j.value("min_count", p.min_count);
    p.epochs = j.value("epochs", p.epochs);
    p.alpha = j.value("alpha", p.alpha);
    p.min_alpha = j.value("min_alpha", p.min_alpha);
    p.seed = j.value("seed", p.seed);
    if (p.dim == 0 || p.window == 0 || p.epochs == 0)
      throw Error("embedding dim, window and epochs must be positive");
    return p;
  }
};

struct EmbeddingModel {
  std::string claim_id;
  std::string community;
  SkipGramParams params;
  WordVectors vectors;
  bool unit_norm = false;
  std::size_t documents = 0;

  /// Word vectors in word2vec text format plus `<path>.json` with the params.
  void save(const std::string& path) const {
    vectors.save(path);
    const json side = {{"claim_id", claim_id},   {"community", community},
                       {"params", params.to_json()}, {"unit_norm", unit_norm},
                       {"documents", documents},  {"vocab", vectors.size()}};
    write_file(path + ".json", side.dump(1) + "\n");
  }

  static EmbeddingModel load(const std::string& path) {
    EmbeddingModel m;
    m.vectors = WordVectors::load(path);
    const json side = json::parse(read_file(path + ".json"));
    m.claim_id = side.at("claim_id").get<std::string>();
    m.community = side.at("community").get<std::string>();
    m.params = SkipGramParams::from_json(side.at("params"));
    m.unit_norm = side.value("unit_norm", false);
    m.documents = side.value("documents", std::size_t{0});
    return m;
  }
};

/// Skip-gram with negative sampling, single-threaded SGD with a linearly
/// decayed learning rate. Context windows shrink randomly per position.
inline WordVectors train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                                  const SkipGramParams& p) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences)
    for (const auto& w : s) ++counts[w];
  std::vector<std::string> vocab;
  std::map<std::string, std::size_t> id;
  for (const auto& [w, c] : counts)
    if (c >= p.min_count) {
      id[w] = vocab.size();
      vocab.push_back(w);
    }
  if (vocab.size() < 2) throw Error("insufficient corpus");

  std::vector<std::vector<std::size_t>> corpus;
  std::size_t total_words = 0;
  for (const auto& s : sentences) {
    std::vector<std::size_t> ids;
    for (const auto& w : s) {
      auto it = id.find(w);
      if (it != id.end()) ids.push_back(it->second);
    }
    total_words += ids.size();
    if (ids.size() > 1) corpus.push_back(std::move(ids));
  }

  // unigram^0.75 cumulative table for negative draws
  std::vector<double> cdf(vocab.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    acc += std::pow(static_cast<double>(counts[vocab[i]]), 0.75);
    cdf[i] = acc;
  }
  for (auto& c : cdf) c /= acc;

  const std::size_t d = p.dim, V = vocab.size();
  Rng rng(p.seed);
  std::vector<double> in(V * d), out(V * d, 0.0), grad(d);
  for (auto& x : in) x = (rng.uniform() - 0.5) / static_cast<double>(d);

  auto sigmoid = [](double x) {
    if (x > 30) return 1.0;
    if (x < -30) return 0.0;
    return 1.0 / (1.0 + std::exp(-x));
  };
  const double planned = static_cast<double>(p.epochs * std::max<std::size_t>(total_words, 1));
  double seen = 0.0;
  for (std::size_t epoch = 0; epoch < p.epochs; ++epoch) {
    for (const auto& s : corpus) {
      for (std::size_t pos = 0; pos < s.size(); ++pos, seen += 1.0) {
        const double alpha = std::max(p.min_alpha, p.alpha * (1.0 - seen / planned));
        const std::size_t shrink = rng.below(p.window);
        const std::size_t reach = p.window - shrink;
        const std::size_t lo = pos >= reach ? pos - reach : 0, hi = std::min(s.size() - 1, pos + reach);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          double* v = &in[s[c] * d];
          std::fill(grad.begin(), grad.end(), 0.0);
          for (std::size_t k = 0; k <= p.negative; ++k) {
            std::size_t target;
            double label;
            if (k == 0) {
              target = s[pos];
              label = 1.0;
            } else {
              target = static_cast<std::size_t>(
                  std::lower_bound(cdf.begin(), cdf.end(), rng.uniform()) - cdf.begin());
              if (target >= V) target = V - 1;
              if (target == s[pos]) continue;
              label = 0.0;
            }
            double* u = &out[target * d];
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += v[i] * u[i];
            const double g = (label - sigmoid(dot)) * alpha;
            for (std::size_t i = 0; i < d; ++i) {
              grad[i] += g * u[i];
              u[i] += g * v[i];
            }
          }
          for (std::size_t i = 0; i < d; ++i) v[i] += grad[i];
        }
      }
    }
  }

  WordVectors wv(d);
  for (std::size_t w = 0; w < V; ++w)
    wv.set(vocab[w], std::vector<double>(in.begin() + static_cast<std::ptrdiff_t>(w * d),
                                         in.begin() + static_cast<std::ptrdiff_t>((w + 1) * d)));
  return wv;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

/// Orthogonal Q minimizing ||S Q - T||_F, from the SVD of S^T T.
inline Eigen::MatrixXd procrustes(const Eigen::MatrixXd& S, const Eigen::MatrixXd& T) {
  if (S.rows() != T.rows() || S.cols() != T.cols()) throw Error("procrustes shape mismatch");
  const Eigen::MatrixXd M = S.transpose() * T;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() > 0 && sv(sv.size() - 1) <= 1e-10 * std::max(sv(0), 1e-300))
    warn("procrustes: rank-deficient anchor matrix; using SVD pseudo-solution");
  return svd.matrixU() * svd.matrixV().transpose();
}

/// Words present in both models, in `a`'s insertion order.
inline std::vector<std::string> shared_vocabulary(const WordVectors& a, const WordVectors& b) {
  std::vector<std::string> out;
  for (const auto& w : a.words())
    if (b.contains(w)) out.push_back(w);
  return out;
}

inline Eigen::MatrixXd stack_rows(const WordVectors& v, const std::vector<std::string>& words) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(words.size()), static_cast<Eigen::Index>(v.dimension()));
  for (std::size_t r = 0; r < words.size(); ++r) {
    const auto& x = v.at(words[r]);
    for (std::size_t c = 0; c < x.size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x[c];
  }
  return m;
}

/// Aligns `source` onto `target` using the full shared vocabulary as anchors.
inline Eigen::MatrixXd procrustes_align(const WordVectors& source, const WordVectors& target) {
  if (source.dimension() != target.dimension()) throw Error("embedding dimensions differ");
  const auto shared = shared_vocabulary(source, target);
  if (shared.size() < source.dimension()) throw Error("insufficient anchor vocabulary");
  return procrustes(stack_rows(source, shared), stack_rows(target, shared));
}

/// Mean cosine between each keyword's vector in `a` and its vector in `b`
/// after aligning `b` onto `a`. Empty when no keyword is in both; cosine
/// already spans [-1, 1] so -1 cannot serve as the marker here.
inline std::optional<double> keyword_similarity(const WordVectors& a, const WordVectors& b,
                                 const std::vector<std::string>& keywords) {
  std::vector<std::string> present;
  for (const auto& k : keywords)
    if (a.contains(k) && b.contains(k) &&
        std::find(present.begin(), present.end(), k) == present.end())
      present.push_back(k);
  if (present.empty()) return std::nullopt;
  const Eigen::MatrixXd Q = procrustes_align(b, a);
  double total = 0.0;
  for (const auto& k : present) {
    const auto& x = b.at(k);
    const Eigen::RowVectorXd bx =
        Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size())) * Q;
    total += cosine(a.at(k), std::vector<double>(bx.data(), bx.data() + bx.size()));
  }
  return total / static_cast<double>(present.size());
}

struct SimilarityMatrix {
  std::vector<std::string> communities;
  std::vector<std::vector<std::optional<double>>> values;  // nullopt = never comparable
  std::map<std::string, std::vector<std::vector<std::optional<double>>>> per_claim;

  /// Heatmap CSV: header row of communities, one row per community, NA for missing.
  std::string to_csv() const {
    std::string s = "community";
    for (const auto& c : communities) s += "," + c;
    s += "\n";
    for (std::size_t i = 0; i < communities.size(); ++i) {
      s += communities[i];
      for (const auto& v : values[i]) s += "," + (v ? format_double(*v) : std::string("NA"));
      s += "\n";
    }
    return s;
  }
};

/// claim id -> community -> model
using ModelTable = std::map<std::string, std::map<std::string, WordVectors>>;

/// Entry (i, j) is the mean over claims of keyword_similarity between the two
/// communities' models, skipping claims where the pair is not comparable.
inline SimilarityMatrix similarity_matrix(const std::vector<std::string>& communities,
                                          const ModelTable& models,
                                          const std::map<std::string, std::vector<std::string>>& keywords,
                                          unsigned threads = 0) {
  const std::size_t n = communities.size();
  using Grid = std::vector<std::vector<std::optional<double>>>;
  SimilarityMatrix sm;
  sm.communities = communities;
  std::vector<std::string> claims;
  for (const auto& [claim, _] : models) claims.push_back(claim);
  std::vector<Grid> grids(claims.size(), Grid(n, std::vector<std::optional<double>>(n)));
  parallel_for(
      claims.size(),
      [&](std::size_t c) {
        const auto& per = models.at(claims[c]);
        auto kw = keywords.find(claims[c]);
        if (kw == keywords.end()) return;
        for (std::size_t i = 0; i < n; ++i) {
          auto a = per.find(communities[i]);
          if (a == per.end()) continue;
          grids[c][i][i] = 1.0;
          for (std::size_t j = i + 1; j < n; ++j) {
            auto b = per.find(communities[j]);
            if (b == per.end()) continue;
            try {
              grids[c][i][j] = grids[c][j][i] = keyword_similarity(a->second, b->second, kw->second);
            } catch (const Error& e) {
              warn("claim " + claims[c] + ": " + communities[i] + " vs " + communities[j] + ": " + e.what());
            }
          }
        }
      },
      threads);
  sm.values.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    sm.values[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double total = 0.0;
      std::size_t count = 0;
      for (const auto& g : grids)
        if (g[i][j]) {
          total += *g[i][j];
          ++count;
        }
      if (count) sm.values[i][j] = sm.values[j][i] = total / static_cast<double>(count);
    }
  }
  for (std::size_t c = 0; c < claims.size(); ++c) sm.per_claim[claims[c]] = std::move(grids[c]);
  return sm;
}

}  // namespace contrail
