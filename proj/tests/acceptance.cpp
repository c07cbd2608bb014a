// One line per acceptance criterion: PASS/FAIL, wall time, detail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Dense>

#include "contrail/analytics.hpp"
#include "contrail/embeddings.hpp"
#include "contrail/hawkes.hpp"
#include "contrail/ltr/evaluation.hpp"
#include "contrail/ltr/nearmiss.hpp"
#include "contrail/pipeline.hpp"
#include "contrail/server.hpp"
#include "contrail/synth.hpp"
#include "contrail/wmd.hpp"
#include "test_util.hpp"
#include "wmd_oracle.hpp"

using namespace contrail;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

struct Criterion {
  std::string name;
  double limit_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- MAP ----

double brute_ap(const std::vector<int>& labels) {
  double sum = 0.0;
  int rel = 0, n = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (!labels[k]) continue;
    rel = 0;
    for (std::size_t i = 0; i <= k; ++i) rel += labels[i];
    sum += static_cast<double>(rel) / static_cast<double>(k + 1);
    ++n;
  }
  return n ? sum / n : 0.0;
}

Outcome check_map_oracle() {
  Rng rng(2718);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<int> labels(1 + rng.below(40));
    for (auto& l : labels) l = rng.uniform() < 0.25 ? 1 : 0;
    if (ltr::average_precision(labels) != brute_ap(labels)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + "/1000 mismatches"};
}

// ---- LTR ----

Outcome check_separable_cv() {
  const auto ds = synth::separable_dataset(50, 12, 31);
  ltr::Hyperparams hp;
  hp.num_bags = 3;
  hp.trees_per_bag = 10;
  const auto cv = ltr::cross_validate(ds, hp, 17);
  return {cv.fold_maps.size() == 5 && cv.mean_map >= 0.95,
          std::to_string(cv.fold_maps.size()) + " folds, mean MAP " + fmt("%.4f", cv.mean_map)};
}

Outcome check_portability() {
  test_util::WarningCapture quiet;
  synth::PortabilityOptions a;
  a.seed = 1;
  synth::PortabilityOptions b;
  b.seed = 2;
  b.time = synth::TimeProfile::bursty;
  b.claims = 12;
  b.on_topic = 45;
  b.distractors = 12;
  b.first_claim = 100;
  const auto fa = synth::portability_fixture(a);
  const auto fb = synth::portability_fixture(b);
  ltr::AssembleOptions opt;
  opt.cap = 0;
  opt.seed = 5;
  const auto da = ltr::assemble(fa.claim_list(), fa.labels, fa.store, fa.vectors, opt);
  const auto db = ltr::assemble(fb.claim_list(), fb.labels, fb.store, fb.vectors, opt);
  const auto model = ltr::train(ltr::undersample(da), ltr::Hyperparams{}, 3);
  const double map_a = ltr::mean_average_precision(model, da);
  const double map_b = ltr::mean_average_precision(model, db);
  return {map_b >= 0.9, "train MAP " + fmt("%.4f", map_a) + ", other-store MAP " + fmt("%.4f", map_b) + " over " +
                            std::to_string(db.groups.size()) + " claims"};
}

ltr::QueryGroup one_dim(const std::vector<double>& pos, const std::vector<double>& neg) {
  ltr::QueryGroup g{"g", {}};
  for (double v : pos) {
    ltr::Row r;
    r.features[0] = v;
    r.label = 1;
    r.terms = "p" + std::to_string(g.rows.size());
    g.rows.push_back(r);
  }
  for (double v : neg) {
    ltr::Row r;
    r.features[0] = v;
    r.terms = "n" + std::to_string(g.rows.size());
    g.rows.push_back(r);
  }
  return g;
}

Outcome check_nearmiss() {
  struct Case {
    ltr::QueryGroup group;
    ltr::NearMissOptions opt;
    std::set<std::string> expected;  // worked out by hand
  };
  const std::vector<Case> cases{
      {one_dim({0.0}, {0.1, 0.2, 5.0}), {}, {"p0", "n3"}},
      {one_dim({0.0, 10.0}, {0.1, 9.5, 50.0}), {1, 2}, {"p0", "p1", "n2", "n3"}},
      {one_dim({0.0, 1.0}, {0.5, 2.0, 3.0, 4.0, -7.0}), {}, {"p0", "p1", "n3", "n4"}},
      {one_dim({0.0}, {1.0, -1.0}), {}, {"p0", "n1"}},
      {one_dim({}, {1.0, 2.0}), {}, {"n0", "n1"}},
  };
  int ok = 0;
  for (const auto& c : cases) {
    std::set<std::string> kept;
    for (const auto& r : ltr::nearmiss3(c.group, c.opt).rows) kept.insert(r.terms);
    if (kept == c.expected) ++ok;
  }
  return {ok == 5, std::to_string(ok) + "/5 fixtures equal"};
}

Outcome check_round_trips() {
  auto ds = synth::separable_dataset(6, 9, 4);
  ds.groups[0].rows[0].features[2] = kSentinel;
  ds.groups[1].rows[1].features[4] = 1.0 / 7.0;
  std::stringstream s1, s2;
  ltr::write_letor(s1, ds);
  const auto back = ltr::read_letor(s1);
  ltr::write_letor(s2, back);
  std::stringstream s0;
  ltr::write_letor(s0, ds);
  const bool letor = back == ds && s2.str() == s0.str();

  ltr::Hyperparams hp;
  hp.num_bags = 4;
  hp.trees_per_bag = 6;
  const auto model = ltr::train(ds, hp, 9);
  const auto reloaded = ltr::RankerModel::from_json(json::parse(model.serialize()));
  bool scores = reloaded.serialize() == model.serialize();
  Rng rng(5);
  for (int i = 0; i < 500 && scores; ++i) {
    FeatureVector x;
    for (std::size_t f = 0; f < kNumFeatures; ++f) x[f] = rng.normal() * 5.0;
    scores = reloaded.score(x) == model.score(x);
  }
  return {letor && scores, std::string("letor ") + (letor ? "exact" : "differs") + ", model " +
                               (scores ? "exact" : "differs")};
}

// ---- WMD ----

WordVectors toy_vocab(Rng& rng, std::size_t words, std::size_t dim) {
  WordVectors wv(dim);
  for (std::size_t w = 0; w < words; ++w) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    wv.set("w" + std::to_string(w), v);
  }
  return wv;
}

double enumerated_wmd(const std::vector<std::string>& x, const std::vector<std::string>& y, const WordVectors& wv) {
  std::map<std::string, double> cx, cy;
  for (const auto& t : x) cx[t] += 1.0 / static_cast<double>(x.size());
  for (const auto& t : y) cy[t] += 1.0 / static_cast<double>(y.size());
  std::vector<double> a, b;
  std::vector<std::vector<double>> cost;
  for (const auto& [wx, mx] : cx) {
    a.push_back(mx);
    cost.emplace_back();
    for (const auto& [wy, my] : cy) {
      double s = 0.0;
      for (std::size_t k = 0; k < wv.dimension(); ++k) s += std::pow(wv.at(wx)[k] - wv.at(wy)[k], 2);
      cost.back().push_back(std::sqrt(s));
    }
  }
  for (const auto& [_, my] : cy) b.push_back(my);
  return test_util::transport_by_enumeration(a, b, cost);
}

Outcome check_wmd_checks() {
  Rng rng(404);
  const auto wv = toy_vocab(rng, 5, 4);
  int bound_fail = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<std::string> x, y;
    for (std::size_t i = 0, n = 1 + rng.below(6); i < n; ++i) x.push_back("w" + std::to_string(rng.below(5)));
    for (std::size_t i = 0, n = 1 + rng.below(6); i < n; ++i) y.push_back("w" + std::to_string(rng.below(5)));
    if (wmd(x, y, wv, WmdMethod::relaxed) > wmd(x, y, wv, WmdMethod::exact) + 1e-12) ++bound_fail;
  }
  // every multiset of 1..3 tokens over the 5-word vocabulary
  std::vector<std::vector<std::string>> docs;
  for (int i = 0; i < 5; ++i) {
    docs.push_back({"w" + std::to_string(i)});
    for (int j = i; j < 5; ++j) {
      docs.push_back({"w" + std::to_string(i), "w" + std::to_string(j)});
      for (int k = j; k < 5; ++k)
        docs.push_back({"w" + std::to_string(i), "w" + std::to_string(j), "w" + std::to_string(k)});
    }
  }
  double worst = 0.0;
  for (const auto& x : docs)
    for (const auto& y : docs) worst = std::max(worst, std::abs(wmd(x, y, wv, WmdMethod::exact) - enumerated_wmd(x, y, wv)));
  return {bound_fail == 0 && worst <= 1e-9, std::to_string(bound_fail) + " bound violations; " +
                                                std::to_string(docs.size() * docs.size()) +
                                                " enumerated pairs, max error " + fmt("%.2e", worst)};
}

// ---- embeddings ----

Outcome check_procrustes() {
  Rng rng(606);
  const std::size_t d = 8;
  WordVectors src(d);
  for (int w = 0; w < 80; ++w) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.normal();
    src.set("w" + std::to_string(w), v);
  }
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();
  const Eigen::MatrixXd R = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  WordVectors rotated(d);
  for (const auto& w : src.words()) {
    const auto& x = src.at(w);
    const Eigen::RowVectorXd y = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(d)) * R;
    rotated.set(w, std::vector<double>(y.data(), y.data() + y.size()));
  }
  const Eigen::MatrixXd Q = procrustes_align(src, rotated);
  const double err = (Q - R).norm();
  const double sim = *keyword_similarity(src, rotated, {"w0", "w5", "w17", "w42"});
  return {err < 1e-6 && std::abs(sim - 1.0) <= 1e-6,
          "|Q-R|_F " + fmt("%.2e", err) + ", keyword similarity " + fmt("%.9f", sim)};
}

// ---- Hawkes ----

const hawkes::HawkesParams& truth() {
  static const hawkes::HawkesParams p{{1.0, 0.2}, {{0.0, 0.5}, {0.0, 0.0}}, 2.0};
  return p;
}

struct RecoveryRun {
  hawkes::EventSeries series;
  hawkes::GibbsResult fit;
};

const RecoveryRun& recovery() {
  static const RecoveryRun r = [] {
    RecoveryRun out;
    out.series = hawkes::simulate(truth(), 1850, 7);
    hawkes::GibbsOptions o;
    o.seed = 3;
    out.fit = hawkes::fit_gibbs(out.series, o);
    return out;
  }();
  return r;
}

Outcome check_hawkes_recovery() {
  const auto& r = recovery();
  const auto& m = r.fit.mean;
  double worst = 0.0;
  for (auto [est, tru] : {std::pair{m.mu[0], 1.0}, {m.mu[1], 0.2}, {m.W[0][1], 0.5}, {m.beta, 2.0}})
    worst = std::max(worst, std::abs(est - tru) / tru);
  const double zero_w = std::max({m.W[0][0], m.W[1][0], m.W[1][1]});
  const bool planted = r.series.total() >= 3000 && worst <= 0.2 && zero_w < 0.05;

  const hawkes::HawkesParams null{{0.2, 0.2}, {{0, 0}, {0, 0}}, 2.0};
  const auto s0 = hawkes::simulate(null, 5000, 21);
  hawkes::GibbsOptions o;
  o.iters = 1000;
  o.burn_in = 250;
  o.seed = 5;
  const auto f0 = hawkes::fit_gibbs(s0, o);
  double max_w = 0.0, max_ext = 0.0;
  for (const auto& row : f0.mean.W)
    for (double w : row) max_w = std::max(max_w, w);
  for (const auto& e : hawkes::influence(f0, s0).external)
    if (e) max_ext = std::max(max_ext, *e);
  return {planted && max_w < 0.05 && max_ext < 5.0,
          std::to_string(r.series.total()) + " events, worst relative error " + fmt("%.3f", worst) +
              ", planted-zero W max " + fmt("%.3f", zero_w) + "; null W max " + fmt("%.3f", max_w) +
              ", null external " + fmt("%.2f", max_ext) + "%"};
}

Outcome check_conservation() {
  const auto& r = recovery();
  std::size_t bad = 0;
  for (const auto& smp : r.fit.samples)
    for (std::size_t j = 0; j < r.series.dimension(); ++j) {
      double anc = smp.attribution.background[j], dir = anc;
      for (std::size_t i = 0; i < r.series.dimension(); ++i) {
        anc += smp.attribution.ancestor[i][j];
        dir += smp.attribution.direct[i][j];
      }
      const double n = static_cast<double>(r.series.events[j].size());
      if (anc != n || dir != n) ++bad;
    }
  return {bad == 0 && !r.fit.samples.empty(),
          std::to_string(r.fit.samples.size()) + " samples, " + std::to_string(bad) + " violations"};
}

// ---- KS ----

double kolmogorov_theta(double lambda) {
  double s = 0.0;
  for (int k = 1; k <= 100; ++k)
    s += std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
  return 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s;
}

Outcome check_ks() {
  using analytics::ks_two_sample;
  const auto same = ks_two_sample({1, 2, 3, 4}, {1, 2, 3, 4});
  const auto disjoint = ks_two_sample({1, 2, 3}, {10, 11});
  const auto half = ks_two_sample({1, 2, 3, 4}, {3, 4, 5, 6});
  double worst = std::abs(half.p_value - kolmogorov_theta(std::sqrt(2.0) * 0.5));
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(5 + rng.below(60)), b(5 + rng.below(60));
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal() + 0.3;
    const auto r = ks_two_sample(a, b);
    const double n = static_cast<double>(a.size() * b.size()) / static_cast<double>(a.size() + b.size());
    const double lambda = std::sqrt(n) * r.d;
    if (lambda >= 0.2) worst = std::max(worst, std::abs(r.p_value - kolmogorov_theta(lambda)));
  }
  const bool ok = same.d == 0.0 && disjoint.d == 1.0 && half.d == 0.5 && worst <= 1e-6;
  return {ok, "D " + fmt("%g", same.d) + "/" + fmt("%g", disjoint.d) + "/" + fmt("%g", half.d) +
                  ", max p-value error " + fmt("%.2e", worst)};
}

// ---- end to end ----

Outcome check_end_to_end() {
  test_util::WarningCapture quiet;
  const auto first = test_util::mini_copy("acceptance_e2e_a");
  const auto second = test_util::mini_copy("acceptance_e2e_b");
  pipeline::Pipeline(pipeline::Config::load(first + "/config.json")).run_all();
  std::vector<std::string> missing;
  for (const char* f : {"lifespan_ccdf", "toxicity_cdf", "similarity_heatmap", "influence_overall",
                        "influence_clinton", "influence_trump", "influence_covid"})
    for (const char* ext : {".csv", ".json"})
      if (!std::filesystem::exists(first + "/out/report/" + f + ext)) missing.push_back(std::string(f) + ext);
  for (const char* f : {"toxicity_ks.csv", "summary.txt"})
    if (!std::filesystem::exists(first + "/out/report/" + f)) missing.push_back(f);
  pipeline::Pipeline(pipeline::Config::load(second + "/config.json")).run_all();
  const bool same = read_file(first + "/out/manifest.json") == read_file(second + "/out/manifest.json");
  return {missing.empty() && same, std::to_string(missing.size()) + " report artifacts missing; rerun manifest " +
                                       (same ? "byte-identical" : "differs")};
}

// ---- annotation API ----

Outcome check_annotation_session() {
  test_util::WarningCapture quiet;
  synth::PortabilityOptions po;
  po.claims = 5;
  const auto fx = synth::portability_fixture(po);
  const auto dir = test_util::scratch_dir("acceptance_annotation");
  const std::string labels_path = dir + "/labels.jsonl";
  server::AnnotationApi api(fx.store, fx.claim_list(), labels_path);
  const int port = api.bind_any();
  std::thread th([&] { api.listen_after_bind(); });
  httplib::Client client("127.0.0.1", port);
  Outcome out;
  auto post = [&](const std::string& path, const json& body) {
    auto r = client.Post(path, body.dump(), "application/json");
    if (!r || r->status != 200) throw Error("request to " + path + " failed");
    return json::parse(r->body);
  };
  try {
    std::string counts;
    for (std::size_t c = 0; c < 3; ++c) {
      const auto& planted = fx.claims[c];
      std::vector<std::string> terms;
      std::size_t previous = std::numeric_limits<std::size_t>::max();
      // toggling terms on narrows the hit count; each count matches the store
      for (const auto& t : planted.true_terms) {
        terms.push_back(t);
        const auto hits = post("/query", {{"terms", terms}, {"claim_id", planted.claim.id}})["hits"].get<std::size_t>();
        if (hits > previous || hits != fx.store.query(terms).size()) out.ok = false;
        previous = hits;
        counts += std::to_string(hits) + (terms.size() == 1 ? ">" : " ");
      }
      post("/labels", {{"claim_id", planted.claim.id}, {"terms", planted.true_terms}, {"relevant", 1}});
      const auto tokens = preprocess(planted.claim.title);
      post("/labels", {{"claim_id", planted.claim.id}, {"terms", {tokens[2], tokens[3]}}, {"relevant", 0}});
    }
    const LabelStore labels(labels_path);
    ltr::AssembleOptions opt;
    opt.cap = 0;
    const auto ds = ltr::assemble(fx.claim_list(), labels, fx.store, fx.vectors, opt);
    out.ok = out.ok && labels.size() == 6 && ds.groups.size() == 3;
    out.detail = "hit counts " + counts + "; " + std::to_string(labels.size()) + " labels on file, assemble built " +
                 std::to_string(ds.groups.size()) + " groups";
  } catch (const std::exception& e) {
    out = {false, e.what()};
  }
  api.stop();
  th.join();
  return out;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"MAP matches brute-force average precision", 5, check_map_oracle},
      {"separable fixture 5-fold CV MAP >= 0.95", 120, check_separable_cv},
      {"model ranks planted queries first on another store, MAP >= 0.9", 60, check_portability},
      {"NearMiss-3 equals hand-executed reference", 0, check_nearmiss},
      {"WMD relaxed bound and exact transport enumeration", 0, check_wmd_checks},
      {"Procrustes recovers planted rotation", 0, check_procrustes},
      {"Hawkes posterior recovers planted and null parameters", 300, check_hawkes_recovery},
      {"attribution conservation in every Gibbs sample", 0, check_conservation},
      {"KS statistic and asymptotic p-values", 0, check_ks},
      {"mini corpus end to end with reproducible manifest", 180, check_end_to_end},
      {"LETOR and model round trips are bit-exact", 0, check_round_trips},
      {"annotation session labels 3 claims and leaves assemble runnable", 0, check_annotation_session},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs >= c.limit_s) {
      o.ok = false;
      o.detail += "; over the " + fmt("%.0f", c.limit_s) + " s limit";
    }
    if (!o.ok) ++failed;
    std::printf("%s  %-66s %8.2fs  %s\n", o.ok ? "PASS" : "FAIL", c.name.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed ? 1 : 0;
}
