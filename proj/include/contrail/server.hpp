#pragma once

// Local JSON API for the annotation loop. Reads the sealed store and claims,
// appends labels to the labels file. The store is never modified.

#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <httplib.h>

#include "contrail/claims.hpp"
#include "contrail/common.hpp"
#include "contrail/corpus.hpp"
#include "contrail/features.hpp"

namespace contrail::server {

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  CandidateMode mode = CandidateMode::combinations;
  std::size_t cap = 100;
  std::uint64_t seed = 1;
};

class AnnotationApi {
 public:
  AnnotationApi(const DocumentStore& store, std::vector<Claim> claims, std::string labels_path,
                ServeOptions opt = {})
      : store_(store), claims_(std::move(claims)), labels_(labels_path), opt_(std::move(opt)) {
    for (std::size_t i = 0; i < claims_.size(); ++i) index_[claims_[i].id] = i;
    routes();
  }

  httplib::Server& http() { return http_; }

  /// Binds and serves until stop(); returns false if the bind fails.
  bool listen() { return http_.listen(opt_.host, opt_.port); }
  /// Binds an ephemeral port on the host; for tests.
  int bind_any() { return http_.bind_to_any_port(opt_.host); }
  bool listen_after_bind() { return http_.listen_after_bind(); }
  void stop() { http_.stop(); }

 private:
  static void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void field_errors(httplib::Response& res, const json& errors) {
    send(res, 400, {{"error", "invalid request"}, {"fields", errors}});
  }

  const Claim* claim(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &claims_[it->second];
  }

  json progress() const {
    std::set<std::string> labeled;
    for (const auto& id : labels_.labeled_claims())
      if (index_.count(id)) labeled.insert(id);
    json per = json::object();
    for (const auto& l : labels_.all()) {
      auto& e = per[l.claim_id];
      if (e.is_null()) e = {{"relevant", 0}, {"irrelevant", 0}};
      e[l.relevant ? "relevant" : "irrelevant"] = e[l.relevant ? "relevant" : "irrelevant"].get<int>() + 1;
    }
    return {{"claims", claims_.size()}, {"labeled", labeled.size()}, {"labels", labels_.size()}, {"per_claim", per}};
  }

  static json doc_json(const Document* d) {
    return {{"id", d->id},     {"platform", to_string(d->platform)}, {"community", d->community},
            {"kind", to_string(d->kind)}, {"timestamp", d->timestamp}, {"text", d->text}};
  }

  /// Parses `terms`; adds messages to `errors` on failure.
  static std::vector<std::string> parse_terms(const json& body, json& errors, std::size_t min_size,
                                              std::size_t max_size) {
    std::vector<std::string> terms;
    if (!body.contains("terms") || !body["terms"].is_array()) {
      errors["terms"] = "required array of strings";
      return terms;
    }
    for (const auto& t : body["terms"]) {
      if (!t.is_string()) {
        errors["terms"] = "required array of strings";
        return {};
      }
      const std::string norm = text::normalize_term(t.get<std::string>());
      if (norm.empty()) {
        errors["terms"] = "terms must contain letters or digits";
        return {};
      }
      if (std::find(terms.begin(), terms.end(), norm) == terms.end()) terms.push_back(norm);
    }
    if (terms.size() < min_size || terms.size() > max_size)
      errors["terms"] = "expected " + std::to_string(min_size) + " to " + std::to_string(max_size) + " distinct terms";
    return terms;
  }

  static std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
    try {
      json j = json::parse(req.body);
      if (!j.is_object()) {
        field_errors(res, {{"body", "expected a JSON object"}});
        return std::nullopt;
      }
      return j;
    } catch (const json::exception&) {
      field_errors(res, {{"body", "malformed JSON"}});
      return std::nullopt;
    }
  }

  void routes() {
    http_.Get("/claims", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mu_);
      std::set<std::string> labeled;
      for (const auto& id : labels_.labeled_claims()) labeled.insert(id);
      json out = json::array();
      for (const auto& c : claims_) {
        json j = to_json(c);
        j["tokens"] = preprocess(c.title);
        j["labeled"] = labeled.count(c.id) > 0;
        out.push_back(j);
      }
      send(res, 200, out);
    });

    http_.Get(R"(/claims/([^/]+)/candidates)", [this](const httplib::Request& req, httplib::Response& res) {
      const Claim* c = claim(req.matches[1]);
      if (!c) return send(res, 404, {{"error", "unknown claim"}, {"claim_id", std::string(req.matches[1])}});
      const IdfTable idf = claim_idf(*c, store_);
      const auto cands = candidate_queries(*c, opt_.mode, opt_.cap, &idf);
      std::lock_guard lock(mu_);
      json list = json::array();
      for (const auto& q : cands) {
        json j = to_json(q);
        if (auto r = labels_.relevance(c->id, q.terms)) j["relevant"] = *r;
        list.push_back(j);
      }
      json labels = json::array();
      for (const auto& l : labels_.for_claim(c->id)) labels.push_back(to_json(l));
      send(res, 200, {{"claim_id", c->id}, {"tokens", preprocess(c->title)}, {"candidates", list}, {"labels", labels}});
    });

    http_.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res);
      if (!body) return;
      json errors = json::object();
      const auto terms = parse_terms(*body, errors, 1, kMaxQueryTerms);
      std::string claim_id;
      if (body->contains("claim_id")) {
        if (!(*body)["claim_id"].is_string())
          errors["claim_id"] = "must be a string";
        else
          claim_id = (*body)["claim_id"].get<std::string>();
      }
      if (!errors.empty()) return field_errors(res, errors);
      if (!claim_id.empty() && !claim(claim_id))
        return send(res, 404, {{"error", "unknown claim"}, {"claim_id", claim_id}});
      const CandidateQuery q{claim_id, terms, CandidateSource::annotated};
      const Hits hits = store_.query(terms);
      json sample = json::array();
      for (const Document* d : annotation_sample(q, store_, kAnnotationSampleSize, derive_seed(opt_.seed, q.key())))
        sample.push_back(doc_json(d));
      send(res, 200, {{"terms", terms}, {"hits", hits.size()}, {"sample", sample}});
    });

    http_.Post("/labels", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res);
      if (!body) return;
      json errors = json::object();
      if (!body->contains("claim_id") || !(*body)["claim_id"].is_string())
        errors["claim_id"] = "required string";
      auto terms = parse_terms(*body, errors, kMinQueryTerms, kMaxQueryTerms);
      bool relevant = false;
      const json rel = body->value("relevant", json());
      if (rel.is_boolean())
        relevant = rel.get<bool>();
      else if (rel.is_number_integer() && (rel.get<int>() == 0 || rel.get<int>() == 1))
        relevant = rel.get<int>() == 1;
      else
        errors["relevant"] = "required: 0, 1, true or false";
      if (!errors.empty()) return field_errors(res, errors);
      const Claim* c = claim((*body)["claim_id"].get<std::string>());
      if (!c) return send(res, 404, {{"error", "unknown claim"}, {"claim_id", (*body)["claim_id"]}});
      const auto tokens = preprocess(c->title);
      for (const auto& t : terms)
        if (std::find(tokens.begin(), tokens.end(), t) == tokens.end())
          return field_errors(res, {{"terms", "'" + t + "' is not a token of the claim"}});
      GroundTruthLabel label{c->id, terms, relevant, body->value("annotator", std::string()),
                             static_cast<std::int64_t>(std::time(nullptr))};
      std::lock_guard lock(mu_);
      try {
        labels_.put(label);
      } catch (const Error& e) {
        return send(res, 500, {{"error", e.what()}});
      }
      send(res, 200, {{"label", to_json(label)}, {"progress", progress()}});
    });

    http_.Get("/progress", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mu_);
      send(res, 200, progress());
    });
  }

  const DocumentStore& store_;
  std::vector<Claim> claims_;
  std::map<std::string, std::size_t> index_;
  LabelStore labels_;
  ServeOptions opt_;
  std::mutex mu_;  // serializes label reads and writes
  httplib::Server http_;
};

}  // namespace contrail::server
