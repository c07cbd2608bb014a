#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "contrail/claims.hpp"
#include "contrail/common.hpp"
#include "contrail/features.hpp"

namespace contrail::ltr {

struct Row {
  FeatureVector features;
  int label = 0;      // 1 = relevant query, 0 = not
  std::string terms;  // canonical term-set key

  bool operator==(const Row&) const = default;
};

struct QueryGroup {
  std::string qid;  // claim id
  std::vector<Row> rows;

  std::size_t positives() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.label == 1;
    return n;
  }
  std::size_t negatives() const { return rows.size() - positives(); }
  bool operator==(const QueryGroup&) const = default;
};

struct RankingDataset {
  std::vector<QueryGroup> groups;

  std::size_t rows() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.rows.size();
    return n;
  }
  bool operator==(const RankingDataset&) const = default;
};

/// One LETOR line: `<label> qid:<qid> 1:<f1> ... 7:<f7> # <claim_id>|<terms>`.
inline std::string letor_line(const std::string& qid, const Row& row) {
  std::string line = std::to_string(row.label) + " qid:" + qid;
  for (std::size_t i = 0; i < kNumFeatures; ++i)
    line += " " + std::to_string(i + 1) + ":" + format_double(row.features[i]);
  line += " # " + qid + "|" + row.terms;
  return line;
}

inline void write_letor(std::ostream& out, const RankingDataset& ds) {
  for (const auto& g : ds.groups)
    for (const auto& r : g.rows) out << letor_line(g.qid, r) << '\n';
}

inline void write_letor(const std::string& path, const RankingDataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write LETOR file: " + path);
  write_letor(out, ds);
}

/// Parses LETOR text. Consecutive rows with the same qid form one group.
inline RankingDataset read_letor(std::istream& in) {
  RankingDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw Error("LETOR line " + std::to_string(lineno) + ": " + why);
    };
    Row row;
    std::string comment;
    const auto hash = line.find(" # ");
    std::string body = line.substr(0, hash);
    if (hash != std::string::npos) comment = line.substr(hash + 3);
    std::istringstream ss(body);
    std::string tok;
    if (!(ss >> tok)) fail("missing label");
    if (tok != "0" && tok != "1") fail("label must be 0 or 1");
    row.label = tok == "1";
    if (!(ss >> tok) || tok.rfind("qid:", 0) != 0) fail("missing qid");
    const std::string qid = tok.substr(4);
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      if (!(ss >> tok)) fail("expected " + std::to_string(kNumFeatures) + " features");
      const auto colon = tok.find(':');
      if (colon == std::string::npos || tok.substr(0, colon) != std::to_string(i + 1))
        fail("feature " + std::to_string(i + 1) + " out of order");
      const std::string value = tok.substr(colon + 1);
      char* end = nullptr;
      row.features[i] = std::strtod(value.c_str(), &end);
      if (end == value.c_str() || *end != '\0') fail("bad feature value '" + value + "'");
    }
    if (ss >> tok) fail("unexpected trailing field '" + tok + "'");
    const auto bar = comment.find('|');
    if (bar != std::string::npos) row.terms = comment.substr(bar + 1);
    if (ds.groups.empty() || ds.groups.back().qid != qid) ds.groups.push_back({qid, {}});
    ds.groups.back().rows.push_back(std::move(row));
  }
  return ds;
}

inline RankingDataset read_letor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read LETOR file: " + path);
  return read_letor(in);
}

struct AssembleOptions {
  CandidateMode mode = CandidateMode::combinations;
  std::size_t cap = 100;
  FeatureOptions features;
  std::uint64_t seed = 0;
};

/// Candidates for one claim: generated queries plus every labeled term set.
inline std::vector<CandidateQuery> labeled_candidates(const Claim& claim, const LabelStore& labels,
                                                      const DocumentStore& store,
                                                      const AssembleOptions& opt) {
  const IdfTable idf = claim_idf(claim, store);
  auto cands = candidate_queries(claim, opt.mode, opt.cap, &idf);
  std::set<std::string> seen;
  for (const auto& c : cands) seen.insert(c.key());
  for (const auto& l : labels.for_claim(claim.id)) {
    CandidateQuery q{claim.id, l.terms, CandidateSource::annotated};
    if (seen.insert(q.key()).second) cands.push_back(std::move(q));
  }
  return cands;
}

/// One query group per claim that has a positive label. Claims without a
/// positive label or without candidates are excluded with a warning.
inline RankingDataset assemble(const std::vector<Claim>& claims, const LabelStore& labels,
                               const DocumentStore& store, const WordVectors& vectors,
                               const AssembleOptions& opt = {}) {
  RankingDataset ds;
  for (const auto& claim : claims) {
    const auto claim_labels = labels.for_claim(claim.id);
    if (claim_labels.empty()) continue;
    const bool has_positive = std::any_of(claim_labels.begin(), claim_labels.end(),
                                          [](const auto& l) { return l.relevant; });
    if (!has_positive) {
      warn("claim " + claim.id + " has no relevant label; excluded from dataset");
      continue;
    }
    const auto cands = labeled_candidates(claim, labels, store, opt);
    if (cands.empty()) {
      warn("claim " + claim.id + " has no candidates; excluded from dataset");
      continue;
    }
    QueryGroup g{claim.id, std::vector<Row>(cands.size())};
    parallel_for(cands.size(), [&](std::size_t i) {
      g.rows[i].features = extract_features(cands[i], claim, store, vectors, opt.seed, opt.features);
      g.rows[i].label = labels.relevance(claim.id, cands[i].terms).value_or(false) ? 1 : 0;
      g.rows[i].terms = cands[i].key();
    });
    ds.groups.push_back(std::move(g));
  }
  return ds;
}

}  // namespace contrail::ltr
