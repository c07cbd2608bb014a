#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "contrail/common.hpp"
#include "contrail/ltr/dataset.hpp"
#include "contrail/ltr/metrics.hpp"

namespace contrail::ltr {

struct Hyperparams {
  int num_bags = 10;
  int trees_per_bag = 20;
  int num_leaves = 8;
  int min_leaf_support = 1;
  double learning_rate = 0.1;
  double feature_subsample = 0.7;  // fraction of features each bag may split on

  int total_trees() const { return num_bags * trees_per_bag; }
  bool operator==(const Hyperparams&) const = default;

  json to_json() const {
    return {{"num_bags", num_bags},
            {"trees_per_bag", trees_per_bag},
            {"num_leaves", num_leaves},
            {"min_leaf_support", min_leaf_support},
            {"learning_rate", learning_rate},
            {"feature_subsample", feature_subsample}};
  }

  static Hyperparams from_json(const json& j) {
    Hyperparams h;
    h.num_bags = j.value("num_bags", h.num_bags);
    h.trees_per_bag = j.value("trees_per_bag", h.trees_per_bag);
    h.num_leaves = j.value("num_leaves", h.num_leaves);
    h.min_leaf_support = j.value("min_leaf_support", h.min_leaf_support);
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.feature_subsample = j.value("feature_subsample", h.feature_subsample);
    h.validate();
    return h;
  }

  /// Sets one grid parameter by name.
  void set(const std::string& name, double v) {
    if (name == "num_bags")
      num_bags = static_cast<int>(v);
    else if (name == "trees_per_bag")
      trees_per_bag = static_cast<int>(v);
    else if (name == "num_leaves")
      num_leaves = static_cast<int>(v);
    else if (name == "min_leaf_support")
      min_leaf_support = static_cast<int>(v);
    else if (name == "learning_rate")
      learning_rate = v;
    else if (name == "feature_subsample")
      feature_subsample = v;
    else
      throw Error("unknown hyperparameter: " + name);
  }

  void validate() const {
    if (num_bags < 1 || trees_per_bag < 1) throw Error("num_bags and trees_per_bag must be >= 1");
    if (num_leaves < 2) throw Error("num_leaves must be >= 2");
    if (min_leaf_support < 1) throw Error("min_leaf_support must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
    if (!(feature_subsample > 0.0 && feature_subsample <= 1.0))
      throw Error("feature_subsample must be in (0, 1]");
  }
};

/// Binary regression tree; `x[feature] <= threshold` goes left.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    bool operator==(const Node&) const = default;
  };

  std::vector<Node> nodes;

  double score(const FeatureVector& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const Node& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  std::size_t leaves() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
  }

  json to_json() const {
    json arr = json::array();
    for (const auto& n : nodes) arr.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    return arr;
  }

  static RegressionTree from_json(const json& j) {
    RegressionTree t;
    for (const auto& a : j)
      t.nodes.push_back({a.at(0).get<int>(), a.at(1).get<double>(), a.at(2).get<int>(),
                         a.at(3).get<int>(), a.at(4).get<double>()});
    if (t.nodes.empty()) throw Error("empty tree in model file");
    return t;
  }

  bool operator==(const RegressionTree&) const = default;
};

namespace detail {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

/// Best least-squares split of `idx` over the allowed features. Thresholds
/// are midpoints between consecutive distinct values.
inline SplitCandidate best_split(const std::vector<std::size_t>& idx,
                                 const std::vector<FeatureVector>& x,
                                 const std::vector<double>& target,
                                 const std::vector<int>& features, int min_leaf) {
  SplitCandidate best;
  const double n = static_cast<double>(idx.size());
  double total = 0.0;
  for (std::size_t i : idx) total += target[i];
  const double base = total * total / n;
  std::vector<std::size_t> order(idx);
  for (int f : features) {
    const auto fi = static_cast<std::size_t>(f);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a][fi] < x[b][fi]; });
    double left = 0.0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      left += target[order[k]];
      const double lo = x[order[k]][fi], hi = x[order[k + 1]][fi];
      if (lo == hi) continue;
      const auto nl = static_cast<double>(k + 1), nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double right = total - left;
      const double gain = left * left / nl + right * right / nr - base;
      if (gain > best.gain + 1e-15) {
        best.gain = gain;
        best.feature = f;
        const double mid = lo + (hi - lo) / 2.0;
        best.threshold = mid < hi ? mid : lo;
      }
    }
  }
  return best;
}

/// Grows a tree leaf-wise (largest gain first) on the pseudo-responses, then
/// sets each leaf to the Newton step sum(lambda) / sum(weight) times `shrinkage`.
inline RegressionTree fit_tree(const std::vector<std::size_t>& rows,
                               const std::vector<FeatureVector>& x,
                               const std::vector<double>& lambda,
                               const std::vector<double>& weight,
                               const std::vector<int>& features, int num_leaves, int min_leaf,
                               double shrinkage) {
  RegressionTree tree;
  struct Leaf {
    int node;
    std::vector<std::size_t> idx;
    SplitCandidate split;
  };
  std::vector<Leaf> open;
  tree.nodes.push_back({});
  open.push_back({0, rows, best_split(rows, x, lambda, features, min_leaf)});
  int leaves = 1;
  while (leaves < num_leaves) {
    int pick = -1;
    for (std::size_t i = 0; i < open.size(); ++i) {
      if (open[i].split.feature < 0) continue;
      if (pick < 0 || open[i].split.gain > open[static_cast<std::size_t>(pick)].split.gain + 1e-15)
        pick = static_cast<int>(i);
    }
    if (pick < 0) break;
    Leaf leaf = std::move(open[static_cast<std::size_t>(pick)]);
    open.erase(open.begin() + pick);
    const auto f = static_cast<std::size_t>(leaf.split.feature);
    std::vector<std::size_t> l, r;
    for (std::size_t i : leaf.idx) (x[i][f] <= leaf.split.threshold ? l : r).push_back(i);
    auto& node = tree.nodes[static_cast<std::size_t>(leaf.node)];
    node.feature = leaf.split.feature;
    node.threshold = leaf.split.threshold;
    node.left = static_cast<int>(tree.nodes.size());
    node.right = node.left + 1;
    const int left_node = node.left, right_node = node.right;
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    open.push_back({left_node, l, best_split(l, x, lambda, features, min_leaf)});
    open.push_back({right_node, r, best_split(r, x, lambda, features, min_leaf)});
    ++leaves;
  }
  for (const auto& leaf : open) {
    double sl = 0.0, sw = 0.0;
    for (std::size_t i : leaf.idx) {
      sl += lambda[i];
      sw += weight[i];
    }
    tree.nodes[static_cast<std::size_t>(leaf.node)].value = sw > 1e-12 ? shrinkage * sl / sw : 0.0;
  }
  return tree;
}

/// LambdaMART gradients for one group with binary labels: every
/// (relevant, irrelevant) pair pushes apart with weight |delta AP| of
/// swapping the two rows in the current ranking.
inline void lambda_gradients(const std::vector<std::size_t>& rows, const std::vector<int>& labels,
                             const std::vector<std::string>& keys,
                             const std::vector<double>& scores, std::vector<double>& lambda,
                             std::vector<double>& weight) {
  std::vector<double> s;
  std::vector<std::string> k;
  for (std::size_t r : rows) {
    s.push_back(scores[r]);
    k.push_back(keys[r]);
  }
  const auto order = rank_order(s, k);
  std::vector<std::size_t> position(rows.size());
  std::vector<int> ranked;
  for (std::size_t p = 0; p < order.size(); ++p) {
    position[order[p]] = p;
    ranked.push_back(labels[rows[order[p]]]);
  }
  const double ap = average_precision(ranked);
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (labels[rows[a]] != 1) continue;
    for (std::size_t b = 0; b < rows.size(); ++b) {
      if (labels[rows[b]] != 0) continue;
      std::swap(ranked[position[a]], ranked[position[b]]);
      const double delta = std::abs(average_precision(ranked) - ap);
      std::swap(ranked[position[a]], ranked[position[b]]);
      const double rho = 1.0 / (1.0 + std::exp(s[a] - s[b]));
      lambda[rows[a]] += rho * delta;
      lambda[rows[b]] -= rho * delta;
      const double w = rho * (1.0 - rho) * delta;
      weight[rows[a]] += w;
      weight[rows[b]] += w;
    }
  }
}

}  // namespace detail

/// Random forest of LambdaMART ensembles: each bag is boosted on a bootstrap
/// sample of query groups restricted to a random feature subset; the model
/// score is the mean of the bag scores.
class RankerModel {
 public:
  static constexpr int kFormatVersion = 1;

  struct Bag {
    std::vector<int> features;
    std::vector<RegressionTree> trees;
    bool operator==(const Bag&) const = default;
  };

  Hyperparams hyperparams;
  std::vector<Bag> bags;
  std::uint64_t seed = 0;
  std::optional<double> cv_map;

  double score(const FeatureVector& x) const {
    if (bags.empty()) return 0.0;
    double total = 0.0;
    for (const auto& bag : bags) {
      double s = 0.0;
      for (const auto& t : bag.trees) s += t.score(x);
      total += s;
    }
    return total / static_cast<double>(bags.size());
  }

  json to_json() const {
    json jb = json::array();
    for (const auto& b : bags) {
      json trees = json::array();
      for (const auto& t : b.trees) trees.push_back(t.to_json());
      jb.push_back({{"features", b.features}, {"trees", trees}});
    }
    json j = {{"format", "contrail-ranker"},
              {"version", kFormatVersion},
              {"hyperparams", hyperparams.to_json()},
              {"seed", seed},
              {"bags", jb}};
    j["cv_map"] = cv_map ? json(*cv_map) : json(nullptr);
    return j;
  }

  std::string serialize() const { return to_json().dump(1) + "\n"; }

  static RankerModel from_json(const json& j) {
    if (j.value("format", "") != "contrail-ranker") throw Error("not a ranker model file");
    if (j.value("version", 0) != kFormatVersion)
      throw Error("unsupported ranker model version: " + j.value("version", json(0)).dump());
    RankerModel m;
    m.hyperparams = Hyperparams::from_json(j.at("hyperparams"));
    m.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("cv_map").is_null()) m.cv_map = j["cv_map"].get<double>();
    for (const auto& b : j.at("bags")) {
      Bag bag;
      bag.features = b.at("features").get<std::vector<int>>();
      for (const auto& t : b.at("trees")) bag.trees.push_back(RegressionTree::from_json(t));
      m.bags.push_back(std::move(bag));
    }
    return m;
  }

  void save(const std::string& path) const { write_file(path, serialize()); }
  static RankerModel load(const std::string& path) {
    try {
      return from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
      throw Error("malformed model file " + path + ": " + e.what());
    }
  }
};

/// Trains the bagged LambdaMART ranker. Deterministic given the seed.
inline RankerModel train(const RankingDataset& ds, const Hyperparams& hp, std::uint64_t seed) {
  hp.validate();
  if (ds.groups.size() < 2) throw Error("training requires at least 2 query groups");
  const bool signal = std::any_of(ds.groups.begin(), ds.groups.end(), [](const QueryGroup& g) {
    return g.positives() > 0 && g.negatives() > 0;
  });
  if (!signal) throw Error("no ranking signal");

  std::vector<FeatureVector> x;
  std::vector<int> labels;
  std::vector<std::string> keys;
  std::vector<std::vector<std::size_t>> group_rows;
  for (const auto& g : ds.groups) {
    std::vector<std::size_t> rows;
    for (const auto& r : g.rows) {
      rows.push_back(x.size());
      x.push_back(r.features);
      labels.push_back(r.label);
      keys.push_back(r.terms);
    }
    group_rows.push_back(std::move(rows));
  }

  RankerModel model;
  model.hyperparams = hp;
  model.seed = seed;
  const std::size_t n_features = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(hp.feature_subsample * kNumFeatures)), 1, kNumFeatures);

  for (int b = 0; b < hp.num_bags; ++b) {
    Rng rng(derive_seed(seed, "bag-" + std::to_string(b)));
    std::vector<std::size_t> sample;
    for (std::size_t i = 0; i < ds.groups.size(); ++i) sample.push_back(rng.below(ds.groups.size()));
    RankerModel::Bag bag;
    for (std::size_t f : sample_without_replacement(kNumFeatures, n_features, rng))
      bag.features.push_back(static_cast<int>(f));

    // bootstrap duplicates become separate copies of the group
    std::vector<FeatureVector> bx;
    std::vector<int> blabels;
    std::vector<std::string> bkeys;
    std::vector<std::vector<std::size_t>> bgroups;
    for (std::size_t gi : sample) {
      std::vector<std::size_t> rows;
      for (std::size_t r : group_rows[gi]) {
        rows.push_back(bx.size());
        bx.push_back(x[r]);
        blabels.push_back(labels[r]);
        bkeys.push_back(keys[r]);
      }
      bgroups.push_back(std::move(rows));
    }
    std::vector<std::size_t> all_rows(bx.size());
    std::iota(all_rows.begin(), all_rows.end(), 0);
    std::vector<double> scores(bx.size(), 0.0);
    for (int t = 0; t < hp.trees_per_bag; ++t) {
      std::vector<double> lambda(bx.size(), 0.0), weight(bx.size(), 0.0);
      for (const auto& rows : bgroups)
        detail::lambda_gradients(rows, blabels, bkeys, scores, lambda, weight);
      RegressionTree tree = detail::fit_tree(all_rows, bx, lambda, weight, bag.features,
                                             hp.num_leaves, hp.min_leaf_support, hp.learning_rate);
      for (std::size_t i = 0; i < bx.size(); ++i) scores[i] += tree.score(bx[i]);
      bag.trees.push_back(std::move(tree));
    }
    model.bags.push_back(std::move(bag));
  }
  return model;
}

}  // namespace contrail::ltr
