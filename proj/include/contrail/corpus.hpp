#pragma once

#include <algorithm>
#include <cstdint>
#include <ctime>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "contrail/common.hpp"
#include "contrail/text.hpp"

namespace contrail {

enum class Platform { reddit, twitter };
enum class Kind { post, comment, tweet };

inline std::string to_string(Platform p) { return p == Platform::reddit ? "reddit" : "twitter"; }

inline std::string to_string(Kind k) {
  switch (k) {
    case Kind::post:
      return "post";
    case Kind::comment:
      return "comment";
    default:
      return "tweet";
  }
}

inline Platform platform_from_string(std::string_view s) {
  if (s == "reddit") return Platform::reddit;
  if (s == "twitter") return Platform::twitter;
  throw Error("unknown platform: " + std::string(s));
}

inline Kind kind_from_string(std::string_view s) {
  if (s == "post") return Kind::post;
  if (s == "comment") return Kind::comment;
  if (s == "tweet") return Kind::tweet;
  throw Error("unknown document kind: " + std::string(s));
}

struct Document {
  std::string id;
  Platform platform = Platform::reddit;
  std::string community;
  Kind kind = Kind::post;
  std::int64_t timestamp = 0;  // seconds since epoch, UTC
  std::string text;
  std::optional<std::string> parent_id;

  bool operator==(const Document&) const = default;
};

inline json to_json(const Document& d) {
  json j = {{"id", d.id},
            {"platform", to_string(d.platform)},
            {"community", d.community},
            {"kind", to_string(d.kind)},
            {"timestamp", d.timestamp},
            {"text", d.text}};
  if (d.parent_id) j["parent_id"] = *d.parent_id;
  return j;
}

/// Single-line JSON; invalid UTF-8 in source text is replaced, never fatal.
inline std::string dump_line(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

inline Document document_from_json(const json& j) {
  Document d;
  d.id = j.at("id").get<std::string>();
  d.platform = platform_from_string(j.at("platform").get<std::string>());
  d.community = j.at("community").get<std::string>();
  d.kind = kind_from_string(j.at("kind").get<std::string>());
  d.timestamp = j.at("timestamp").get<std::int64_t>();
  d.text = j.at("text").get<std::string>();
  if (j.contains("parent_id") && !j["parent_id"].is_null())
    d.parent_id = j["parent_id"].get<std::string>();
  return d;
}

enum class DumpFormat { reddit_jsonl, twitter_jsonl };

inline DumpFormat dump_format_from_string(std::string_view s) {
  if (s == "reddit_jsonl") return DumpFormat::reddit_jsonl;
  if (s == "twitter_jsonl") return DumpFormat::twitter_jsonl;
  throw Error("unknown dump format: " + std::string(s));
}

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t duplicates = 0;
  // community -> kind -> count of accepted records
  std::map<std::string, std::map<std::string, std::size_t>> counts;

  json to_json() const {
    return {{"accepted", accepted}, {"rejected", rejected}, {"duplicates", duplicates},
            {"counts", counts}};
  }
};

struct IngestOptions {
  // Reddit posts are matched on title + selftext unless this is false.
  bool include_post_body = true;
};

struct TimeRange {
  std::int64_t start = 0;
  std::int64_t end = 0;  // inclusive
};

struct QueryOptions {
  std::optional<std::string> community;
  std::optional<Platform> platform;
  std::optional<TimeRange> time_range;
};

using Hits = std::vector<const Document*>;

namespace detail {

inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// "Wed Oct 10 20:19:24 +0000 2018"
inline std::optional<std::int64_t> parse_twitter_date(const std::string& s) {
  static const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                  "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  char wday[4]{}, mon[4]{};
  int day = 0, hh = 0, mm = 0, ss = 0, year = 0;
  char sign = '+';
  int offset = 0;
  if (std::sscanf(s.c_str(), "%3s %3s %d %d:%d:%d %c%4d %d", wday, mon, &day, &hh, &mm, &ss,
                  &sign, &offset, &year) != 9)
    return std::nullopt;
  int month = -1;
  for (int i = 0; i < 12; ++i)
    if (std::string_view(mon) == kMonths[i]) month = i + 1;
  if (month < 0 || day < 1 || day > 31) return std::nullopt;
  const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month),
                                            static_cast<unsigned>(day));
  std::int64_t t = days * 86400 + hh * 3600 + mm * 60 + ss;
  const int off_sec = (offset / 100) * 3600 + (offset % 100) * 60;
  t += sign == '-' ? off_sec : -off_sec;
  return t;
}

inline std::optional<std::int64_t> json_epoch(const json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) return static_cast<std::int64_t>(v.get<double>());
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    try {
      std::size_t pos = 0;
      const double x = std::stod(s, &pos);
      if (pos != s.size()) return std::nullopt;
      return static_cast<std::int64_t>(x);
    } catch (...) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

inline std::string json_string(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  const auto& v = j[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  return {};
}

inline std::string strip_fullname_prefix(std::string s) {
  if (s.size() > 3 && s[0] == 't' && s[2] == '_') return s.substr(3);
  return s;
}

inline std::optional<Document> parse_reddit(const json& j, const IngestOptions& opt) {
  const std::string id = json_string(j, "id");
  const std::string sub = json_string(j, "subreddit");
  if (id.empty() || sub.empty() || !j.contains("created_utc")) return std::nullopt;
  const auto ts = json_epoch(j["created_utc"]);
  if (!ts) return std::nullopt;
  Document d;
  d.id = id;
  d.platform = Platform::reddit;
  d.community = sub;
  d.timestamp = *ts;
  if (j.contains("title") && j["title"].is_string()) {
    d.kind = Kind::post;
    d.text = j["title"].get<std::string>();
    const std::string body = json_string(j, "selftext");
    if (opt.include_post_body && !body.empty()) d.text += "\n" + body;
  } else if (j.contains("body") && j["body"].is_string()) {
    d.kind = Kind::comment;
    d.text = j["body"].get<std::string>();
    std::string parent = json_string(j, "link_id");
    if (parent.empty()) parent = json_string(j, "parent_id");
    if (!parent.empty()) d.parent_id = strip_fullname_prefix(parent);
  } else {
    return std::nullopt;
  }
  return d;
}

inline std::optional<Document> parse_twitter(const json& j) {
  std::string id = json_string(j, "id_str");
  if (id.empty()) id = json_string(j, "id");
  if (id.empty()) return std::nullopt;
  std::optional<std::int64_t> ts;
  if (j.contains("timestamp_ms")) {
    if (auto ms = json_epoch(j["timestamp_ms"])) ts = *ms / 1000;
  }
  if (!ts && j.contains("created_at") && j["created_at"].is_string())
    ts = parse_twitter_date(j["created_at"].get<std::string>());
  if (!ts) return std::nullopt;
  std::string text = json_string(j, "full_text");
  if (text.empty()) text = json_string(j, "text");
  Document d;
  d.id = id;
  d.platform = Platform::twitter;
  d.community = "twitter";
  d.kind = Kind::tweet;
  d.timestamp = *ts;
  d.text = std::move(text);
  std::string parent = json_string(j, "in_reply_to_status_id_str");
  if (!parent.empty()) d.parent_id = parent;
  return d;
}

}  // namespace detail

/// Time-ordered document collection with an inverted token index.
///
/// Documents are added freely; seal() sorts them by (timestamp, platform, id)
/// and builds the indexes. Queries require a sealed store. A sealed store is
/// immutable and safe to share between reader threads.
class DocumentStore {
 public:
  static constexpr std::string_view kFileHeader = "contrail-store v1";

  /// Adds a validated document. Returns false for a duplicate (platform, id).
  /// Throws Error when the document violates the store invariants.
  bool add(Document doc) {
    if (doc.timestamp <= 0) throw Error("document timestamp must be positive: " + doc.id);
    if (doc.id.empty()) throw Error("document id must be non-empty");
    if (text::is_blank(doc.text)) throw Error("document text is blank: " + doc.id);
    auto key = std::make_pair(doc.platform, doc.id);
    if (keys_.count(key)) return false;
    keys_.insert(std::move(key));
    docs_.push_back(std::move(doc));
    sealed_ = false;
    return true;
  }

  IngestReport ingest(const std::string& path, DumpFormat format,
                      const IngestOptions& options = {}) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read dump file: " + path);
    IngestReport report;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (text::is_blank(line)) continue;
      std::optional<Document> doc;
      try {
        const json j = json::parse(line);
        if (j.is_object())
          doc = format == DumpFormat::reddit_jsonl ? detail::parse_reddit(j, options)
                                                   : detail::parse_twitter(j);
      } catch (const json::exception&) {
        doc.reset();
      }
      if (!doc || doc->timestamp <= 0 || text::is_blank(doc->text)) {
        ++report.rejected;
        continue;
      }
      const std::string community = doc->community;
      const std::string kind = to_string(doc->kind);
      if (add(std::move(*doc))) {
        ++report.accepted;
        ++report.counts[community][kind];
      } else {
        ++report.duplicates;
      }
    }
    seal();
    return report;
  }

  IngestReport ingest(const std::string& path, std::string_view format,
                      const IngestOptions& options = {}) {
    return ingest(path, dump_format_from_string(format), options);
  }

  void seal() {
    if (sealed_) return;
    std::sort(docs_.begin(), docs_.end(), [](const Document& a, const Document& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      if (a.platform != b.platform) return a.platform < b.platform;
      return a.id < b.id;
    });
    token_index_.clear();
    community_index_.clear();
    children_index_.clear();
    tokens_.assign(docs_.size(), {});
    for (std::uint32_t i = 0; i < docs_.size(); ++i) {
      const Document& d = docs_[i];
      tokens_[i] = text::tokenize(d.text);
      std::vector<std::string> uniq = tokens_[i];
      std::sort(uniq.begin(), uniq.end());
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      for (auto& t : uniq) token_index_[t].push_back(i);
      community_index_[d.community].push_back(i);
      if (d.parent_id) children_index_[*d.parent_id].push_back(i);
    }
    sealed_ = true;
  }

  bool sealed() const { return sealed_; }
  std::size_t size() const { return docs_.size(); }
  const std::vector<Document>& documents() const { return docs_; }

  /// Tokens of document i (normalized, stopwords retained). Requires seal().
  const std::vector<std::string>& tokens(std::size_t i) const {
    require_sealed();
    return tokens_.at(i);
  }

  std::size_t index_of(const Document* d) const {
    return static_cast<std::size_t>(d - docs_.data());
  }

  /// Number of documents containing the normalized token.
  std::size_t document_frequency(const std::string& token) const {
    require_sealed();
    auto it = token_index_.find(token);
    return it == token_index_.end() ? 0 : it->second.size();
  }

  std::vector<std::string> communities() const {
    require_sealed();
    std::vector<std::string> out;
    for (auto& [c, ids] : community_index_) out.push_back(c);
    return out;
  }

  std::size_t community_size(const std::string& community) const {
    require_sealed();
    auto it = community_index_.find(community);
    return it == community_index_.end() ? 0 : it->second.size();
  }

  /// Documents whose token set contains every term, sorted by timestamp.
  Hits query(const std::vector<std::string>& terms, const QueryOptions& options = {}) const {
    require_sealed();
    if (terms.empty()) throw Error("query terms must be non-empty");
    std::vector<const std::vector<std::uint32_t>*> lists;
    for (const auto& raw : terms) {
      const std::string term = text::normalize_term(raw);
      auto it = token_index_.find(term);
      if (term.empty() || it == token_index_.end()) return {};
      lists.push_back(&it->second);
    }
    std::sort(lists.begin(), lists.end(),
              [](auto* a, auto* b) { return a->size() < b->size(); });
    std::vector<std::uint32_t> current = *lists.front();
    std::vector<std::uint32_t> next;
    for (std::size_t k = 1; k < lists.size() && !current.empty(); ++k) {
      next.clear();
      std::set_intersection(current.begin(), current.end(), lists[k]->begin(),
                            lists[k]->end(), std::back_inserter(next));
      current.swap(next);
    }
    Hits out;
    for (std::uint32_t i : current) {
      const Document& d = docs_[i];
      if (options.community && d.community != *options.community) continue;
      if (options.platform && d.platform != *options.platform) continue;
      if (options.time_range &&
          (d.timestamp < options.time_range->start || d.timestamp > options.time_range->end))
        continue;
      out.push_back(&d);
    }
    return out;
  }

  /// Comments and replies whose parent is the given document id.
  Hits children(const std::string& parent_id) const {
    require_sealed();
    Hits out;
    auto it = children_index_.find(parent_id);
    if (it == children_index_.end()) return out;
    for (std::uint32_t i : it->second) out.push_back(&docs_[i]);
    return out;
  }

  const Document* find(Platform platform, const std::string& id) const {
    for (const auto& d : docs_)
      if (d.platform == platform && d.id == id) return &d;
    return nullptr;
  }

  /// Writes the versioned single-file index: header line, then one JSON
  /// document per line in store order.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write store file: " + path);
    out << kFileHeader << '\n';
    for (const auto& d : docs_) out << dump_line(to_json(d)) << '\n';
  }

  static DocumentStore load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read store file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kFileHeader)
      throw Error("unsupported store file version: " + path);
    DocumentStore store;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      store.add(document_from_json(json::parse(line)));
    }
    store.seal();
    return store;
  }

  /// Exports accepted records as JSONL in store order.
  void export_jsonl(std::ostream& out) const {
    for (const auto& d : docs_) out << dump_line(to_json(d)) << '\n';
  }

 private:
  void require_sealed() const {
    if (!sealed_) throw Error("document store is not sealed");
  }

  std::vector<Document> docs_;
  std::vector<std::vector<std::string>> tokens_;
  std::set<std::pair<Platform, std::string>> keys_;
  std::unordered_map<std::string, std::vector<std::uint32_t>> token_index_;
  std::map<std::string, std::vector<std::uint32_t>> community_index_;
  std::unordered_map<std::string, std::vector<std::uint32_t>> children_index_;
  bool sealed_ = true;
};

struct SpanFractions {
  double oldest = 0.2;
  double newest = 0.2;
  double middle = 0.1;
};

/// Oldest/newest slices and a uniform sample of the middle of a hit list.
template <typename T>
struct SpanningSubset {
  std::vector<T> oldest;
  std::vector<T> newest;
  std::vector<T> middle_sample;
  std::uint64_t seed = 0;

  std::size_t size() const { return oldest.size() + newest.size() + middle_sample.size(); }
  bool empty() const { return size() == 0; }

  std::vector<T> all() const {
    std::vector<T> out(oldest);
    out.insert(out.end(), middle_sample.begin(), middle_sample.end());
    out.insert(out.end(), newest.begin(), newest.end());
    return out;
  }
};

/// Splits a timestamp-ordered hit list. Fewer than 10 hits are returned whole
/// in `oldest`. Otherwise the end slices take floor(fraction * n) with a
/// minimum of one, and the middle sample takes ceil(fraction * remainder).
template <typename T>
SpanningSubset<T> spanning_subset(std::span<const T> hits, const SpanFractions& fractions,
                                  std::uint64_t seed) {
  SpanningSubset<T> out;
  out.seed = seed;
  const std::size_t n = hits.size();
  if (n < 10) {
    out.oldest.assign(hits.begin(), hits.end());
    return out;
  }
  auto floor_count = [n](double f) {
    const auto k = static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
    return std::max<std::size_t>(1, k);
  };
  std::size_t n_old = std::min(floor_count(fractions.oldest), n);
  std::size_t n_new = std::min(floor_count(fractions.newest), n - n_old);
  const std::size_t rest = n - n_old - n_new;
  const auto n_mid = std::min(
      rest, static_cast<std::size_t>(std::ceil(fractions.middle * static_cast<double>(rest) - 1e-9)));
  out.oldest.assign(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n_old));
  out.newest.assign(hits.end() - static_cast<std::ptrdiff_t>(n_new), hits.end());
  Rng rng(seed);
  for (std::size_t idx : sample_without_replacement(rest, n_mid, rng))
    out.middle_sample.push_back(hits[n_old + idx]);
  return out;
}

template <typename T>
SpanningSubset<T> spanning_subset(const std::vector<T>& hits, std::uint64_t seed,
                                  const SpanFractions& fractions = {}) {
  return spanning_subset(std::span<const T>(hits), fractions, seed);
}

}  // namespace contrail
