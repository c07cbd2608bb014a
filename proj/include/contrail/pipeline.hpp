#pragma once

// Staged pipeline over a JSON config. Every stage writes its artifacts under
// the output directory and records a manifest entry; a stage whose inputs
// hash matches its entry (and whose artifacts are intact) is skipped.

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "contrail/analytics.hpp"
#include "contrail/claims.hpp"
#include "contrail/common.hpp"
#include "contrail/corpus.hpp"
#include "contrail/embeddings.hpp"
#include "contrail/features.hpp"
#include "contrail/hawkes.hpp"
#include "contrail/ltr/dataset.hpp"
#include "contrail/ltr/evaluation.hpp"
#include "contrail/ltr/lambdamart.hpp"
#include "contrail/toxicity.hpp"
#include "contrail/wmd.hpp"

namespace contrail::pipeline {

namespace fs = std::filesystem;

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"ingest", "candidates", "featurize", "train",
                                              "cv",     "extract",    "embed",     "similarity",
                                              "hawkes", "analyze",    "report"};
  return names;
}

inline bool is_stage(const std::string& s) {
  const auto& n = stage_names();
  return std::find(n.begin(), n.end(), s) != n.end();
}

/// Stages whose artifacts a stage reads.
inline const std::vector<std::string>& prerequisites(const std::string& stage) {
  static const std::map<std::string, std::vector<std::string>> deps{
      {"ingest", {}},
      {"candidates", {"ingest"}},
      {"featurize", {"ingest"}},
      {"train", {"featurize"}},
      {"cv", {"ingest", "featurize", "train"}},
      {"extract", {"ingest", "featurize", "train"}},
      {"embed", {"ingest", "extract"}},
      {"similarity", {"embed", "extract"}},
      {"hawkes", {"ingest", "extract"}},
      {"analyze", {"ingest", "extract", "hawkes"}},
      {"report", {"ingest", "extract", "similarity", "analyze"}}};
  auto it = deps.find(stage);
  if (it == deps.end()) throw Error("unknown stage: " + stage);
  return it->second;
}

struct DumpSpec {
  std::string path;
  std::string format;
};

struct Config {
  std::string source;  // config file path
  std::string claims_path;
  std::vector<DumpSpec> dumps;
  std::string labels_path;
  std::optional<std::string> vectors_path;
  std::string output_dir;

  std::vector<std::string> communities;
  std::vector<std::string> baseline_communities;
  IngestOptions ingest;
  CandidateMode candidate_mode = CandidateMode::combinations;
  std::size_t candidate_cap = 100;
  SkipGramParams fallback_vectors;

  ltr::Grid grid = ltr::default_grid();
  std::size_t folds = 5;
  bool undersample = true;
  ltr::NearMissOptions nearmiss;

  SkipGramParams embedding;
  std::size_t min_documents = 50;

  hawkes::GibbsOptions gibbs;
  hawkes::AttributionMode attribution = hawkes::AttributionMode::ancestor;
  std::vector<std::string> topics;
  std::vector<hawkes::Exclusion> exclusions;

  toxicity::ClientConfig scoring;
  std::uint64_t seed = 1;
  unsigned threads = 0;

  json raw;  // parsed file, hashed per stage

  /// Config sections that a stage's output depends on.
  json section_for(const std::string& stage) const {
    auto pick = [&](std::initializer_list<const char*> keys) {
      json j = json::object();
      for (const char* k : keys)
        if (raw.contains(k)) j[k] = raw[k];
      return j;
    };
    if (stage == "ingest") return pick({"ingest"});
    if (stage == "candidates" || stage == "extract") return pick({"candidates"});
    if (stage == "featurize") return pick({"candidates", "vectors"});
    if (stage == "train" || stage == "cv") return pick({"ltr"});
    if (stage == "embed") return pick({"embeddings", "communities"});
    if (stage == "similarity") return pick({"communities"});
    if (stage == "hawkes") return pick({"hawkes", "communities"});
    if (stage == "analyze") return pick({"hawkes", "communities", "baseline_communities", "scoring"});
    return json::object();
  }

  static Config from_json(const json& j, const std::string& base_dir) {
    Config c;
    c.raw = j;
    auto resolve = [&](const std::string& p) {
      const fs::path path(p);
      return (path.is_absolute() ? path : fs::path(base_dir) / path).lexically_normal().string();
    };
    auto require = [&](const json& obj, const char* key, const std::string& where) -> const json& {
      if (!obj.contains(key)) throw Error("config: missing '" + where + key + "'");
      return obj.at(key);
    };
    try {
      const json& paths = require(j, "paths", "");
      c.claims_path = resolve(require(paths, "claims", "paths.").get<std::string>());
      for (const auto& d : require(paths, "dumps", "paths.")) {
        DumpSpec spec{resolve(d.at("path").get<std::string>()), d.at("format").get<std::string>()};
        dump_format_from_string(spec.format);
        c.dumps.push_back(spec);
      }
      c.labels_path = resolve(require(paths, "labels", "paths.").get<std::string>());
      if (paths.contains("vectors") && !paths["vectors"].is_null())
        c.vectors_path = resolve(paths["vectors"].get<std::string>());
      c.output_dir = resolve(paths.value("output", std::string("out")));

      c.communities = require(j, "communities", "").get<std::vector<std::string>>();
      if (c.communities.size() < 2) throw Error("config: at least 2 communities are required");
      c.baseline_communities = j.value("baseline_communities", std::vector<std::string>{});
      if (j.contains("ingest")) c.ingest.include_post_body = j["ingest"].value("include_post_body", true);
      if (j.contains("candidates")) {
        c.candidate_mode = candidate_mode_from_string(j["candidates"].value("mode", std::string("combinations")));
        c.candidate_cap = j["candidates"].value("cap", c.candidate_cap);
      }
      if (j.contains("vectors")) c.fallback_vectors = SkipGramParams::from_json(j["vectors"]);
      if (j.contains("ltr")) {
        const auto& l = j["ltr"];
        c.folds = l.value("folds", c.folds);
        c.undersample = l.value("undersample", c.undersample);
        c.nearmiss.shortlist_m = l.value("nearmiss_m", c.nearmiss.shortlist_m);
        c.nearmiss.k = l.value("nearmiss_k", c.nearmiss.k);
        if (l.contains("grid")) c.grid = l["grid"].get<ltr::Grid>();
      }
      if (j.contains("embeddings")) {
        c.embedding = SkipGramParams::from_json(j["embeddings"]);
        c.min_documents = j["embeddings"].value("min_documents", c.min_documents);
      }
      if (j.contains("hawkes")) {
        const auto& h = j["hawkes"];
        c.gibbs.iters = h.value("iters", c.gibbs.iters);
        c.gibbs.burn_in = h.value("burn_in", c.gibbs.burn_in);
        c.gibbs.beta_grid = h.value("beta_grid", c.gibbs.beta_grid);
        if (h.contains("priors")) {
          const auto& p = h["priors"];
          c.gibbs.priors.mu_shape = p.value("mu_shape", c.gibbs.priors.mu_shape);
          c.gibbs.priors.mu_rate = p.value("mu_rate", c.gibbs.priors.mu_rate);
          c.gibbs.priors.w_shape = p.value("w_shape", c.gibbs.priors.w_shape);
          c.gibbs.priors.w_rate = p.value("w_rate", c.gibbs.priors.w_rate);
        }
        const std::string mode = h.value("attribution", std::string("ancestor"));
        if (mode != "ancestor" && mode != "direct") throw Error("config: hawkes.attribution must be 'ancestor' or 'direct'");
        c.attribution = mode == "direct" ? hawkes::AttributionMode::direct : hawkes::AttributionMode::ancestor;
        c.topics = h.value("topics", std::vector<std::string>{});
        for (const auto& e : h.value("exclusions", json::array()))
          c.exclusions.push_back({e.at("community").get<std::string>(), e.value("from", std::string("0000-00-00")),
                                  e.value("to", std::string("9999-12-31"))});
        if (c.gibbs.iters <= c.gibbs.burn_in) throw Error("config: hawkes.iters must exceed hawkes.burn_in");
      }
      if (j.contains("scoring")) c.scoring = toxicity::ClientConfig::from_json(j["scoring"]);
      if (c.scoring.mode == "remote" && c.scoring.cache_path.empty())
        c.scoring.cache_path = (fs::path(c.output_dir) / "toxicity_cache.jsonl").string();
      else if (!c.scoring.cache_path.empty())
        c.scoring.cache_path = resolve(c.scoring.cache_path);
      c.seed = j.value("seed", c.seed);
      c.threads = j.value("threads", c.threads);
    } catch (const json::exception& e) {
      throw Error(std::string("config: ") + e.what());
    }
    return c;
  }

  static Config load(const std::string& path) {
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw Error("config " + path + " is not valid JSON: " + e.what());
    }
    Config c = from_json(j, fs::absolute(path).parent_path().string());
    c.source = path;
    c.validate();
    return c;
  }

  /// Every referenced input must exist. A missing labels file is an empty
  /// label set, but its directory must exist.
  void validate() const {
    auto must = [](const std::string& p, const std::string& what) {
      if (!fs::exists(p)) throw Error(what + " not found: " + p);
    };
    must(claims_path, "claims file");
    if (dumps.empty()) throw Error("config: paths.dumps is empty");
    for (const auto& d : dumps) must(d.path, "dump file");
    must(fs::path(labels_path).parent_path().string(), "labels directory");
    if (vectors_path) must(*vectors_path, "vectors file");
  }
};

inline std::string hash_file(const std::string& path) { return hex64(fnv1a(read_file(path))); }

struct StageOutcome {
  std::string stage;
  bool ran = false;
  double seconds = 0.0;
};

class Pipeline {
 public:
  explicit Pipeline(Config cfg) : cfg_(std::move(cfg)), out_(cfg_.output_dir) {
    fs::create_directories(out_);
    const auto mpath = out_ / "manifest.json";
    if (fs::exists(mpath)) {
      try {
        manifest_ = json::parse(read_file(mpath.string()));
      } catch (const json::exception&) {
        warn("manifest is unreadable; all stages will rerun");
      }
    }
    if (!manifest_.is_object() || !manifest_.contains("stages")) manifest_ = {{"version", 1}, {"stages", json::object()}};
  }

  const Config& config() const { return cfg_; }
  const json& manifest() const { return manifest_; }
  fs::path output_dir() const { return out_; }

  StageOutcome run(const std::string& stage) {
    if (!is_stage(stage)) throw Error("unknown stage: " + stage);
    for (const auto& dep : prerequisites(stage)) require(stage, dep);
    const std::string inputs = inputs_hash(stage);
    if (up_to_date(stage, inputs)) return {stage, false, 0.0};

    const auto start = std::chrono::steady_clock::now();
    artifacts_ = json::object();
    dispatch(stage);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    manifest_["stages"][stage] = {{"inputs", inputs}, {"seed", cfg_.seed}, {"artifacts", artifacts_}};
    write_file((out_ / "manifest.json").string(), manifest_.dump(2) + "\n");
    record_timing(stage, secs);
    return {stage, true, secs};
  }

  std::vector<StageOutcome> run_all() {
    std::vector<StageOutcome> out;
    for (const auto& s : stage_names()) out.push_back(run(s));
    return out;
  }

  // Shared loaders, also used by the HTTP server.
  const DocumentStore& store() {
    if (!store_) store_ = DocumentStore::load((out_ / "store.dat").string());
    return *store_;
  }
  const std::vector<Claim>& claims() {
    if (!claims_) claims_ = load_claims((out_ / "claims.jsonl").string());
    return *claims_;
  }

 private:
  void require(const std::string& stage, const std::string& dep) {
    const std::string hint = "stage '" + stage + "' needs the output of '" + dep + "'; run `contrail " + dep +
                             " --config " + (cfg_.source.empty() ? std::string("<file>") : cfg_.source) + "` first";
    if (!manifest_["stages"].contains(dep)) throw Error(hint);
    for (const auto& [rel, h] : manifest_["stages"][dep]["artifacts"].items()) {
      const auto p = out_ / rel;
      if (!fs::exists(p) || hash_file(p.string()) != h.get<std::string>())
        throw Error(hint + " (artifact " + rel + " is missing or modified)");
    }
  }

  bool up_to_date(const std::string& stage, const std::string& inputs) {
    const auto& st = manifest_["stages"];
    if (!st.contains(stage) || st[stage].value("inputs", "") != inputs) return false;
    for (const auto& [rel, h] : st[stage]["artifacts"].items()) {
      const auto p = out_ / rel;
      if (!fs::exists(p) || hash_file(p.string()) != h.get<std::string>()) return false;
    }
    return true;
  }

  std::string inputs_hash(const std::string& stage) {
    json in = {{"stage", stage}, {"seed", cfg_.seed}, {"config", cfg_.section_for(stage)}};
    for (const auto& dep : prerequisites(stage)) in["deps"][dep] = manifest_["stages"][dep]["artifacts"];
    if (stage == "ingest") {
      in["claims"] = hash_file(cfg_.claims_path);
      for (const auto& d : cfg_.dumps) in["dumps"].push_back({{"format", d.format}, {"hash", hash_file(d.path)}});
    }
    if (stage == "featurize" || stage == "cv")
      in["labels"] = fs::exists(cfg_.labels_path) ? hash_file(cfg_.labels_path) : std::string("absent");
    if (stage == "featurize" && cfg_.vectors_path) in["vectors"] = hash_file(*cfg_.vectors_path);
    return hex64(fnv1a(in.dump()));
  }

  void record_timing(const std::string& stage, double secs) {
    const auto tpath = out_ / "timings.json";
    json t = json::object();
    if (fs::exists(tpath)) {
      try {
        t = json::parse(read_file(tpath.string()));
      } catch (const json::exception&) {
      }
    }
    t[stage] = secs;
    write_file(tpath.string(), t.dump(2) + "\n");
  }

  /// Writes an artifact and records its content hash.
  void put(const std::string& rel, const std::string& content) {
    const auto p = out_ / rel;
    fs::create_directories(p.parent_path());
    write_file(p.string(), content);
    artifacts_[rel] = hex64(fnv1a(content));
  }

  void clear_dir(const std::string& rel) { fs::remove_all(out_ / rel); }

  std::string read(const std::string& rel) const { return read_file((out_ / rel).string()); }
  json read_json(const std::string& rel) const { return json::parse(read(rel)); }

  void dispatch(const std::string& stage) {
    if (stage == "ingest") return ingest();
    if (stage == "candidates") return candidates();
    if (stage == "featurize") return featurize();
    if (stage == "train") return train();
    if (stage == "cv") return cross_validate();
    if (stage == "extract") return extract();
    if (stage == "embed") return embed();
    if (stage == "similarity") return similarity();
    if (stage == "hawkes") return fit_hawkes();
    if (stage == "analyze") return analyze();
    if (stage == "report") return report();
    throw InternalError("stage without implementation: " + stage);
  }

  // -- stages ---------------------------------------------------------------

  void ingest() {
    DocumentStore s;
    json reports = json::array();
    for (const auto& d : cfg_.dumps) {
      const auto r = s.ingest(d.path, d.format, cfg_.ingest);
      reports.push_back({{"file", fs::path(d.path).filename().string()}, {"format", d.format}, {"report", r.to_json()}});
    }
    s.seal();
    const auto cl = load_claims(cfg_.claims_path);
    for (const auto& c : cl)
      if (preprocess(c.title).size() < kMinQueryTerms) warn("claim " + c.id + " has fewer than 2 content tokens");
    std::ostringstream store_bytes;
    store_bytes << DocumentStore::kFileHeader << '\n';
    s.export_jsonl(store_bytes);
    put("store.dat", store_bytes.str());
    std::string claims_text;
    for (const auto& c : cl) claims_text += to_json(c).dump() + "\n";
    put("claims.jsonl", claims_text);
    put("ingest.json", json{{"dumps", reports}, {"documents", s.size()}, {"claims", cl.size()}}.dump(1) + "\n");
    store_.reset();
    claims_.reset();
  }

  std::vector<CandidateQuery> claim_candidates(const Claim& c) {
    const IdfTable idf = claim_idf(c, store());
    return candidate_queries(c, cfg_.candidate_mode, cfg_.candidate_cap, &idf);
  }

  void candidates() {
    std::string lines;
    json flagged = json::array(), counts = json::object();
    for (const auto& c : claims()) {
      const auto cands = claim_candidates(c);
      if (cands.empty()) flagged.push_back(c.id);
      counts[c.id] = cands.size();
      for (std::size_t r = 0; r < cands.size(); ++r) {
        json j = to_json(cands[r]);
        j["rank"] = r;
        j["hits"] = store().query(cands[r].terms).size();
        lines += j.dump() + "\n";
      }
    }
    put("candidates.jsonl", lines);
    put("candidates.json", json{{"counts", counts}, {"flagged", flagged}}.dump(1) + "\n");
  }

  WordVectors load_vectors() {
    if (vectors_) return *vectors_;
    const json info = read_json("featurize.json").at("vectors");
    if (info.at("source") == "external") {
      if (!cfg_.vectors_path) throw Error("featurize used external vectors but the config no longer names them");
      vectors_ = WordVectors::load(*cfg_.vectors_path);
    } else {
      vectors_ = WordVectors::load((out_ / "vectors.txt").string());
    }
    return *vectors_;
  }

  std::vector<std::vector<std::string>> content_sentences(const Hits& docs) {
    std::vector<std::vector<std::string>> out;
    for (const Document* d : docs) {
      auto t = document_content_tokens(store(), d);
      if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
  }

  void featurize() {
    json vinfo;
    if (cfg_.vectors_path) {
      vectors_ = WordVectors::load(*cfg_.vectors_path);
      vinfo = {{"source", "external"}, {"words", vectors_->size()}, {"dimension", vectors_->dimension()}};
    } else {
      Hits all;
      for (const auto& d : store().documents()) all.push_back(&d);
      SkipGramParams p = cfg_.fallback_vectors;
      p.seed = derive_seed(cfg_.seed, "vectors");
      vectors_ = train_skipgram(content_sentences(all), p);
      const auto tmp = out_ / "vectors.txt";
      vectors_->save(tmp.string());
      put("vectors.txt", read_file(tmp.string()));
      vinfo = {{"source", "trained"}, {"words", vectors_->size()}, {"dimension", vectors_->dimension()},
               {"params", p.to_json()}};
    }
    const LabelStore labels(cfg_.labels_path);
    ltr::AssembleOptions opt;
    opt.mode = cfg_.candidate_mode;
    opt.cap = cfg_.candidate_cap;
    opt.seed = derive_seed(cfg_.seed, "features");
    const auto ds = ltr::assemble(claims(), labels, store(), *vectors_, opt);
    if (ds.groups.empty()) warn("no labeled claims; the train stage will need labels");
    std::ostringstream letor;
    ltr::write_letor(letor, ds);
    put("dataset.letor", letor.str());
    json groups = json::array();
    for (const auto& g : ds.groups)
      groups.push_back({{"claim_id", g.qid}, {"rows", g.rows.size()}, {"positives", g.positives()}});
    put("featurize.json", json{{"vectors", vinfo}, {"groups", groups}, {"rows", ds.rows()}}.dump(1) + "\n");
  }

  ltr::CvOptions cv_options() const {
    ltr::CvOptions o;
    o.k = cfg_.folds;
    o.undersample = cfg_.undersample;
    o.nearmiss = cfg_.nearmiss;
    o.threads = cfg_.threads;
    return o;
  }

  void train() {
    const auto ds = ltr::read_letor((out_ / "dataset.letor").string());
    if (ds.groups.size() < cfg_.folds)
      throw Error("training needs at least " + std::to_string(cfg_.folds) + " labeled claims for " +
                  std::to_string(cfg_.folds) + "-fold search, found " + std::to_string(ds.groups.size()) +
                  "; add labels (contrail serve) or lower ltr.folds");
    const auto grid = ltr::grid_search(ds, cfg_.grid, derive_seed(cfg_.seed, "grid"), cv_options());
    std::string csv = "num_leaves,num_bags,trees_per_bag,min_leaf_support,learning_rate,mean_map";
    for (std::size_t f = 0; f < cfg_.folds; ++f) csv += ",fold" + std::to_string(f + 1);
    csv += "\n";
    double best_map = 0.0;
    for (const auto& row : grid.table) {
      const auto& h = row.hyperparams;
      csv += std::to_string(h.num_leaves) + "," + std::to_string(h.num_bags) + "," + std::to_string(h.trees_per_bag) +
             "," + std::to_string(h.min_leaf_support) + "," + format_double(h.learning_rate) + "," +
             format_double(row.cv.mean_map);
      for (double m : row.cv.fold_maps) csv += "," + format_double(m);
      csv += "\n";
      if (h == grid.best) best_map = row.cv.mean_map;
    }
    put("grid.csv", csv);
    auto model = ltr::train(ltr::prepare_training(ds, cv_options()), grid.best, derive_seed(cfg_.seed, "final"));
    model.cv_map = best_map;
    put("model.json", model.serialize());
  }

  ltr::RankerModel load_model() { return ltr::RankerModel::from_json(read_json("model.json")); }

  void cross_validate() {
    const auto ds = ltr::read_letor((out_ / "dataset.letor").string());
    const auto model = load_model();
    const auto res = ltr::cross_validate(ds, model.hyperparams, derive_seed(cfg_.seed, "cv"), cv_options());
    json folds = json::array();
    for (std::size_t f = 0; f < res.folds.size(); ++f) {
      json ids = json::array();
      for (std::size_t g : res.folds[f]) ids.push_back(ds.groups[g].qid);
      folds.push_back({{"claims", ids}, {"map", res.fold_maps[f]}});
    }
    put("cv.json", json{{"k", cfg_.folds}, {"hyperparams", model.hyperparams.to_json()}, {"folds", folds},
                        {"mean_map", res.mean_map}}.dump(1) + "\n");

    const LabelStore labels(cfg_.labels_path);
    const WordVectors vectors = load_vectors();
    ltr::SelectOptions sel{cfg_.candidate_mode, cfg_.candidate_cap, {}};
    const std::vector<ltr::KeywordMethod> methods{
        ltr::ltr_method(model, store(), vectors, derive_seed(cfg_.seed, "features"), sel),
        ltr::first_tokens_baseline(2), ltr::tfidf_baseline(store(), 2)};
    const auto table = ltr::baseline_compare(claims(), labels, store(), methods);
    std::string csv = "method,claim_id,valid_pct\n";
    for (const auto& row : table) {
      for (const auto& [cid, pct] : row.per_claim) csv += row.method + "," + cid + "," + format_double(pct) + "\n";
      csv += row.method + ",mean," + format_double(row.mean_valid_pct) + "\n";
    }
    put("baselines.csv", csv);
  }

  void extract() {
    const auto model = load_model();
    const WordVectors vectors = load_vectors();
    ltr::SelectOptions sel{cfg_.candidate_mode, cfg_.candidate_cap, {}};
    json selection = json::array();
    std::string lines;
    for (const auto& c : claims()) {
      const auto ranked = ltr::select_keywords(model, c, store(), vectors, derive_seed(cfg_.seed, "features"), sel);
      json entry = {{"claim_id", c.id}};
      if (ranked.empty()) {
        entry["flagged"] = true;
        entry["terms"] = json::array();
        entry["hits"] = 0;
        selection.push_back(entry);
        continue;
      }
      const Hits hits = store().query(ranked.front().candidate.terms);
      entry["flagged"] = false;
      entry["terms"] = ranked.front().candidate.terms;
      entry["score"] = ranked.front().score;
      entry["hits"] = hits.size();
      json top = json::array();
      for (std::size_t r = 0; r < ranked.size() && r < 5; ++r)
        top.push_back({{"terms", ranked[r].candidate.terms}, {"score", ranked[r].score}});
      entry["top"] = top;
      selection.push_back(entry);
      for (const Document* d : hits)
        lines += json{{"claim_id", c.id}, {"platform", to_string(d->platform)}, {"id", d->id},
                      {"community", d->community}, {"kind", to_string(d->kind)}, {"timestamp", d->timestamp}}
                     .dump() +
                 "\n";
    }
    put("selection.json", selection.dump(1) + "\n");
    put("extracted.jsonl", lines);
  }

  /// Selected query terms per claim (flagged claims omitted).
  std::map<std::string, std::vector<std::string>> selected_terms() const {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& e : read_json("selection.json"))
      if (!e.at("flagged").get<bool>())
        out[e.at("claim_id").get<std::string>()] = e.at("terms").get<std::vector<std::string>>();
    return out;
  }

  /// Extracted documents per claim, recovered by re-running the selected query.
  std::map<std::string, Hits> extraction() {
    std::map<std::string, Hits> out;
    for (const auto& [cid, terms] : selected_terms()) out[cid] = store().query(terms);
    return out;
  }

  void embed() {
    clear_dir("models");
    const auto ex = extraction();
    struct Job {
      std::string claim, community;
      Hits docs;
    };
    std::vector<Job> jobs;
    json skipped = json::array();
    for (const auto& c : claims()) {
      auto it = ex.find(c.id);
      if (it == ex.end()) continue;
      for (const auto& comm : cfg_.communities) {
        Hits docs;
        for (const Document* d : it->second)
          if (d->community == comm) docs.push_back(d);
        if (docs.size() < cfg_.min_documents) {
          skipped.push_back({{"claim_id", c.id}, {"community", comm}, {"documents", docs.size()},
                             {"reason", "below min_documents"}});
          continue;
        }
        jobs.push_back({c.id, comm, std::move(docs)});
      }
    }
    std::vector<std::optional<EmbeddingModel>> models(jobs.size());
    std::vector<std::string> errors(jobs.size());
    store();  // load before the workers read it
    parallel_for(
        jobs.size(),
        [&](std::size_t i) {
          SkipGramParams p = cfg_.embedding;
          p.seed = derive_seed(cfg_.seed, "embed/" + jobs[i].claim + "/" + jobs[i].community);
          try {
            EmbeddingModel m{jobs[i].claim, jobs[i].community, p, train_skipgram(content_sentences(jobs[i].docs), p),
                             false, jobs[i].docs.size()};
            models[i] = std::move(m);
          } catch (const Error& e) {
            errors[i] = e.what();
          }
        },
        cfg_.threads);
    json trained = json::array();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (!models[i]) {
        skipped.push_back({{"claim_id", jobs[i].claim}, {"community", jobs[i].community},
                           {"documents", jobs[i].docs.size()}, {"reason", errors[i]}});
        continue;
      }
      const std::string rel = "models/" + jobs[i].claim + "/" + jobs[i].community + ".w2v";
      fs::create_directories((out_ / rel).parent_path());
      models[i]->save((out_ / rel).string());
      put(rel, read(rel));
      put(rel + ".json", read(rel + ".json"));
      trained.push_back({{"claim_id", jobs[i].claim}, {"community", jobs[i].community}, {"documents", jobs[i].docs.size()},
                         {"vocabulary", models[i]->vectors.size()}, {"path", rel}});
    }
    put("embed.json", json{{"trained", trained}, {"skipped", skipped}}.dump(1) + "\n");
  }

  void similarity() {
    ModelTable table;
    const json embedded = read_json("embed.json");
    for (const auto& m : embedded.at("trained"))
      table[m.at("claim_id").get<std::string>()][m.at("community").get<std::string>()] =
          EmbeddingModel::load((out_ / m.at("path").get<std::string>()).string()).vectors;
    const auto sm = similarity_matrix(cfg_.communities, table, selected_terms(), cfg_.threads);
    auto grid_json = [](const std::vector<std::vector<std::optional<double>>>& g) {
      json rows = json::array();
      for (const auto& r : g) {
        json row = json::array();
        for (const auto& v : r) row.push_back(v ? json(*v) : json(nullptr));
        rows.push_back(row);
      }
      return rows;
    };
    json per = json::object();
    for (const auto& [cid, g] : sm.per_claim) per[cid] = grid_json(g);
    put("similarity.csv", sm.to_csv());
    put("similarity.json",
        json{{"communities", sm.communities}, {"values", grid_json(sm.values)}, {"per_claim", per}}.dump(1) + "\n");
  }

  static json influence_json(const hawkes::InfluenceMatrix& m) {
    json norm = json::array();
    for (const auto& r : m.normalized) {
      json row = json::array();
      for (const auto& v : r) row.push_back(v ? json(*v) : json(nullptr));
      norm.push_back(row);
    }
    json ext = json::array();
    for (const auto& v : m.external) ext.push_back(v ? json(*v) : json(nullptr));
    return {{"processes", m.processes}, {"raw", m.raw},       {"background", m.background},
            {"totals", m.totals},       {"normalized", norm}, {"external", ext}};
  }

  static hawkes::InfluenceMatrix influence_from_json(const json& j) {
    hawkes::InfluenceMatrix m{j.at("processes").get<std::vector<std::string>>(), j.at("raw").get<hawkes::Matrix>(),
                              j.at("background").get<std::vector<double>>(), j.at("totals").get<std::vector<double>>(),
                              {}, {}};
    m.finalize();
    return m;
  }

  void fit_hawkes() {
    clear_dir("hawkes");
    const auto ex = extraction();
    std::vector<hawkes::EventSeries> series;
    json unfittable = json::array();
    for (const auto& c : claims()) {
      auto it = ex.find(c.id);
      if (it == ex.end()) continue;
      auto s = hawkes::build_series(c.id, it->second, cfg_.communities);
      if (!s.fittable()) {
        unfittable.push_back({{"claim_id", c.id}, {"events", s.total()}, {"nonempty", s.nonempty()}});
        continue;
      }
      series.push_back(std::move(s));
    }
    std::vector<json> results(series.size());
    std::vector<std::string> csv(series.size());
    parallel_for(
        series.size(),
        [&](std::size_t i) {
          auto opt = cfg_.gibbs;
          opt.seed = derive_seed(cfg_.seed, "hawkes/" + series[i].claim_id);
          const auto fit = hawkes::fit_gibbs(series[i], opt);
          const auto inf = hawkes::influence(fit, series[i], cfg_.attribution);
          json counts = json::array();
          for (const auto& e : series[i].events) counts.push_back(e.size());
          results[i] = {{"claim_id", series[i].claim_id}, {"processes", series[i].processes},
                        {"events", counts},                {"horizon_days", series[i].horizon},
                        {"params", fit.mean.to_json()},    {"diagnostics", fit.diagnostics()},
                        {"influence", influence_json(inf)}};
          csv[i] = inf.to_csv();
        },
        cfg_.threads);
    json fitted = json::array();
    for (std::size_t i = 0; i < series.size(); ++i) {
      put("hawkes/" + series[i].claim_id + ".json", results[i].dump(1) + "\n");
      put("hawkes/" + series[i].claim_id + "_influence.csv", csv[i]);
      fitted.push_back(series[i].claim_id);
    }
    put("hawkes.json", json{{"fitted", fitted}, {"unfittable", unfittable},
                            {"attribution", cfg_.attribution == hawkes::AttributionMode::ancestor ? "ancestor" : "direct"}}
                           .dump(1) + "\n");
  }

  void analyze() {
    const auto ex = extraction();
    // lifespans
    json lifespans = json::array();
    std::vector<double> months;
    for (const auto& c : claims()) {
      auto it = ex.find(c.id);
      if (it == ex.end() || it->second.empty()) continue;
      const double m = *analytics::lifespan_months(it->second);
      months.push_back(m);
      json per = json::object();
      for (const auto& [p, v] : analytics::lifespan_by_platform(it->second)) per[to_string(p)] = v;
      lifespans.push_back({{"claim_id", c.id}, {"months", m}, {"documents", it->second.size()}, {"platforms", per}});
    }
    json ccdf = json::array();
    for (const auto& pt : analytics::ccdf_table(months)) ccdf.push_back({pt.x, pt.y});

    // toxicity groups
    std::set<const Document*> seen;
    Hits posts, comments, tweets;
    for (const auto& [cid, hits] : ex)
      for (const Document* d : hits) {
        if (!seen.insert(d).second) continue;
        (d->kind == Kind::post ? posts : d->kind == Kind::comment ? comments : tweets).push_back(d);
      }
    auto by_store_order = [&](Hits& h) {
      std::sort(h.begin(), h.end(), [&](auto a, auto b) { return store().index_of(a) < store().index_of(b); });
    };
    by_store_order(posts);
    by_store_order(comments);
    by_store_order(tweets);
    const Hits replies = analytics::submission_comments(store(), posts);
    const Hits base_posts = analytics::baseline_sample(store(), cfg_.baseline_communities, Kind::post, posts.size(),
                                                       derive_seed(cfg_.seed, "baseline-posts"));
    const Hits base_comments = analytics::baseline_sample(store(), cfg_.baseline_communities, Kind::comment,
                                                          comments.size(), derive_seed(cfg_.seed, "baseline-comments"));
    toxicity::Client client(cfg_.scoring);
    std::vector<analytics::NamedSample> samples;
    json unscored = json::object();
    std::string score_lines;
    for (const auto& [name, hits] : std::vector<std::pair<std::string, const Hits*>>{
             {analytics::groups::conspiracy_posts, &posts},
             {analytics::groups::conspiracy_comments, &comments},
             {analytics::groups::submission_comments, &replies},
             {analytics::groups::baseline_posts, &base_posts},
             {analytics::groups::baseline_comments, &base_comments},
             {analytics::groups::tweets, &tweets}}) {
      auto r = client.score_all(*hits);
      analytics::NamedSample s{name, {}};
      for (const auto& sc : r.scores) {
        s.values.push_back(sc.score);
        json j = sc.to_json();
        j["group"] = name;
        score_lines += j.dump() + "\n";
      }
      unscored[name] = r.unscored.size();
      samples.push_back(std::move(s));
    }
    json tox;
    if (std::any_of(samples.begin(), samples.end(), [](const auto& s) { return !s.values.empty(); })) {
      const auto dist = analytics::emit_distributions(samples);
      put("toxicity_cdf.csv", dist.cdf_csv());
      put("toxicity_ks.csv", dist.ks_csv());
      json ks = json::array();
      for (const auto& r : dist.ks)
        ks.push_back({{"a", r.a}, {"b", r.b}, {"d", r.result.d}, {"p_value", r.result.p_value},
                      {"n1", r.result.n1}, {"n2", r.result.n2}, {"flagged", r.flagged}});
      tox = {{"grid", dist.grid}, {"cdf", dist.cdf}, {"ks", ks}};
    } else {
      warn("no documents to score for toxicity");
      tox = {{"grid", json::array()}, {"cdf", json::object()}, {"ks", json::array()}};
    }
    json sizes = json::object();
    for (const auto& s : samples) sizes[s.name] = s.values.size();
    tox["sizes"] = sizes;
    tox["unscored"] = unscored;
    tox["model"] = cfg_.scoring.model;
    tox["mode"] = cfg_.scoring.mode;
    put("toxicity_scores.jsonl", score_lines);

    // influence aggregation
    std::map<std::string, hawkes::InfluenceMatrix> per_claim;
    const json fits = read_json("hawkes.json");
    for (const auto& j : fits.at("fitted")) {
      const auto cid = j.get<std::string>();
      per_claim[cid] = influence_from_json(read_json("hawkes/" + cid + ".json").at("influence"));
    }
    json influence = json::object();
    std::vector<std::pair<std::string, std::optional<std::string>>> slices{{"overall", std::nullopt}};
    for (const auto& t : cfg_.topics) slices.push_back({t, t});
    for (const auto& [name, topic] : slices) {
      hawkes::AggregateOptions opt{topic, cfg_.exclusions};
      try {
        const auto agg = hawkes::aggregate_influence(cfg_.communities, claims(), per_claim, opt);
        influence[name] = influence_json(agg);
        put("influence_" + name + ".csv", agg.to_csv());
      } catch (const Error& e) {
        warn("influence slice '" + name + "': " + e.what());
        influence[name] = nullptr;
      }
    }
    put("analyze.json", json{{"lifespan", {{"claims", lifespans}, {"ccdf", ccdf}}},
                             {"toxicity", tox},
                             {"influence", influence}}
                            .dump(1) + "\n");
  }

  void report() {
    clear_dir("report");
    const json a = read_json("analyze.json");

    // lifespan CCDF
    std::string csv = "months,ccdf\n";
    for (const auto& p : a["lifespan"]["ccdf"]) csv += format_double(p[0]) + "," + format_double(p[1]) + "\n";
    put("report/lifespan_ccdf.csv", csv);
    put("report/lifespan_ccdf.json", json{{"figure", "lifespan_ccdf"}, {"points", a["lifespan"]["ccdf"]},
                                          {"claims", a["lifespan"]["claims"]}}.dump(1) + "\n");

    // toxicity CDF
    put("report/toxicity_cdf.json", json{{"figure", "toxicity_cdf"}, {"grid", a["toxicity"]["grid"]},
                                         {"cdf", a["toxicity"]["cdf"]}, {"ks", a["toxicity"]["ks"]},
                                         {"sizes", a["toxicity"]["sizes"]}}.dump(1) + "\n");
    put("report/toxicity_cdf.csv", fs::exists(out_ / "toxicity_cdf.csv") ? read("toxicity_cdf.csv") : std::string("x\n"));
    put("report/toxicity_ks.csv",
        fs::exists(out_ / "toxicity_ks.csv") ? read("toxicity_ks.csv") : std::string("group_a,group_b,n1,n2,d,p_value,flagged\n"));

    // similarity heatmap
    const json sim = read_json("similarity.json");
    put("report/similarity_heatmap.csv", read("similarity.csv"));
    put("report/similarity_heatmap.json",
        json{{"figure", "similarity_heatmap"}, {"communities", sim["communities"]}, {"values", sim["values"]}}.dump(1) + "\n");

    // influence bars: off-diagonal entries only
    for (const auto& [name, m] : a["influence"].items()) {
      if (m.is_null()) continue;
      const auto procs = m["processes"].get<std::vector<std::string>>();
      std::string rows = "source,target,raw,normalized\n";
      json bars = json::array();
      for (std::size_t i = 0; i < procs.size(); ++i)
        for (std::size_t j = 0; j < procs.size(); ++j) {
          if (i == j) continue;
          const json& norm = m["normalized"][i][j];
          rows += procs[i] + "," + procs[j] + "," + format_double(m["raw"][i][j].get<double>()) + "," +
                  (norm.is_null() ? std::string("NA") : format_double(norm.get<double>())) + "\n";
          bars.push_back({{"source", procs[i]}, {"target", procs[j]}, {"normalized", norm}});
        }
      put("report/influence_" + name + ".csv", rows);
      put("report/influence_" + name + ".json",
          json{{"figure", "influence_" + name}, {"bars", bars}, {"external", m["external"]}, {"totals", m["totals"]}}
                  .dump(1) + "\n");
    }

    put("report/summary.txt", summary_text());
  }

 public:
  /// Dataset counts in the style of a methods section.
  std::string summary_text() {
    std::size_t posts = 0, comments = 0, tweets = 0;
    std::set<std::string> subreddits;
    for (const auto& d : store().documents()) {
      if (d.kind == Kind::post) ++posts;
      if (d.kind == Kind::comment) ++comments;
      if (d.kind == Kind::tweet) ++tweets;
      if (d.platform == Platform::reddit) subreddits.insert(d.community);
    }
    std::size_t ex_posts = 0, ex_comments = 0, ex_tweets = 0;
    std::set<const Document*> seen;
    for (const auto& [cid, hits] : extraction())
      for (const Document* d : hits) {
        if (!seen.insert(d).second) continue;
        ex_posts += d->kind == Kind::post;
        ex_comments += d->kind == Kind::comment;
        ex_tweets += d->kind == Kind::tweet;
      }
    std::string s;
    s += "documents: " + std::to_string(store().size()) + "\n";
    s += "posts: " + std::to_string(posts) + "\n";
    s += "comments: " + std::to_string(comments) + "\n";
    s += "tweets: " + std::to_string(tweets) + "\n";
    s += "subreddits: " + std::to_string(subreddits.size()) + "\n";
    s += "claims: " + std::to_string(claims().size()) + "\n";
    s += "extracted posts: " + std::to_string(ex_posts) + "\n";
    s += "extracted comments: " + std::to_string(ex_comments) + "\n";
    s += "extracted tweets: " + std::to_string(ex_tweets) + "\n";
    s += "\n" + std::to_string(posts) + " total posts and " + std::to_string(comments) + " total comments from " +
         std::to_string(subreddits.size()) + " subreddits, and " + std::to_string(tweets) + " tweets; " +
         std::to_string(ex_posts + ex_comments + ex_tweets) + " documents matched the selected queries of " +
         std::to_string(claims().size()) + " claims.\n";
    return s;
  }

 private:
  Config cfg_;
  fs::path out_;
  json manifest_;
  json artifacts_;
  std::optional<DocumentStore> store_;
  std::optional<std::vector<Claim>> claims_;
  std::optional<WordVectors> vectors_;
};

}  // namespace contrail::pipeline
