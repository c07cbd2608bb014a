#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "contrail/common.hpp"
#include "contrail/corpus.hpp"

namespace contrail::toxicity {

enum class Source { remote, stub, cached };

inline std::string to_string(Source s) {
  switch (s) {
    case Source::remote: return "remote";
    case Source::stub: return "stub";
    case Source::cached: return "cached";
  }
  throw InternalError("bad toxicity source");
}

struct Score {
  std::string doc_id;
  double score = 0.0;
  std::string model;
  Source source = Source::stub;

  json to_json() const {
    return {{"doc_id", doc_id}, {"score", score}, {"model", model}, {"source", to_string(source)}};
  }
};

struct ClientConfig {
  std::string mode = "stub";  // stub | remote
  std::string endpoint = "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze";
  std::string model = "SEVERE_TOXICITY";
  std::string api_key_env = "PERSPECTIVE_API_KEY";
  double requests_per_second = 1.0;
  int max_retries = 5;
  double initial_backoff = 1.0;  // seconds, doubled per retry
  double timeout = 30.0;
  std::string cache_path;  // JSONL, empty = in-memory only

  static ClientConfig from_json(const json& j) {
    ClientConfig c;
    c.mode = j.value("mode", c.mode);
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.requests_per_second = j.value("requests_per_second", c.requests_per_second);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.initial_backoff = j.value("initial_backoff", c.initial_backoff);
    c.timeout = j.value("timeout", c.timeout);
    c.cache_path = j.value("cache_path", c.cache_path);
    if (c.mode != "stub" && c.mode != "remote") throw Error("scoring mode must be 'stub' or 'remote'");
    if (!(c.requests_per_second > 0)) throw Error("requests_per_second must be positive");
    return c;
  }
};

/// Time source and sleeper, replaceable in tests.
struct Clock {
  std::function<double()> now = [] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  };
  std::function<void(double)> sleep = [](double s) {
    if (s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
  };
};

struct HttpReply {
  int status = 0;  // 0 = transport failure
  std::string body;
};

/// POSTs a JSON body to the endpoint; replaceable in tests.
using Transport = std::function<HttpReply(const std::string& body)>;

/// Deterministic score in [0, 1) derived from the text and model.
inline double stub_score(const std::string& text, const std::string& model) {
  return static_cast<double>(fnv1a(model + '\x1f' + text) >> 11) * 0x1.0p-53;
}

inline Transport http_transport(const ClientConfig& cfg) {
  const auto scheme_end = cfg.endpoint.find("://");
  if (scheme_end == std::string::npos) throw Error("scoring endpoint must be an absolute URL");
  const auto path_start = cfg.endpoint.find('/', scheme_end + 3);
  const std::string host = cfg.endpoint.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : cfg.endpoint.substr(path_start);
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key && *key) path += (path.find('?') == std::string::npos ? "?key=" : "&key=") + std::string(key);
  const double timeout = cfg.timeout;
  return [host, path, timeout](const std::string& body) {
    httplib::Client cli(host);
    cli.set_connection_timeout(static_cast<time_t>(timeout));
    cli.set_read_timeout(static_cast<time_t>(timeout));
    auto res = cli.Post(path, body, "application/json");
    if (!res) return HttpReply{0, {}};
    return HttpReply{res->status, res->body};
  };
}

/// Rate-limited scoring client with an append-only JSONL cache keyed by
/// (text hash, model). Failures after retries leave the document unscored.
class Client {
 public:
  explicit Client(ClientConfig cfg, Transport transport = {}, Clock clock = {})
      : cfg_(std::move(cfg)), transport_(std::move(transport)), clock_(std::move(clock)) {
    if (cfg_.mode == "remote" && !transport_) transport_ = http_transport(cfg_);
    if (!cfg_.cache_path.empty()) load_cache();
  }

  struct Result {
    std::vector<Score> scores;
    std::vector<std::string> unscored;  // doc ids
  };

  std::optional<Score> score(const Document& d) {
    const std::string key = cache_key(d.text);
    if (auto it = cache_.find(key); it != cache_.end()) return Score{d.id, it->second, cfg_.model, Source::cached};
    std::optional<double> s;
    Source source = Source::stub;
    if (cfg_.mode == "stub") {
      s = stub_score(d.text, cfg_.model);
    } else {
      s = request(d.text);
      source = Source::remote;
    }
    if (!s) return std::nullopt;
    remember(key, *s);
    return Score{d.id, *s, cfg_.model, source};
  }

  Result score_all(const Hits& docs) {
    Result r;
    for (const Document* d : docs) {
      if (auto s = score(*d)) {
        r.scores.push_back(*s);
      } else {
        r.unscored.push_back(d->id);
      }
    }
    return r;
  }

  std::size_t requests_sent() const { return requests_; }

 private:
  std::string cache_key(const std::string& text) const { return hex64(fnv1a(text)) + "|" + cfg_.model; }

  void load_cache() {
    std::ifstream in(cfg_.cache_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const json j = json::parse(line);
        cache_[j.at("hash").get<std::string>() + "|" + j.at("model").get<std::string>()] =
            j.at("score").get<double>();
      } catch (const json::exception&) {
        warn("skipping malformed cache line in " + cfg_.cache_path);
      }
    }
  }

  void remember(const std::string& key, double score) {
    cache_[key] = score;
    if (cfg_.cache_path.empty()) return;
    const auto bar = key.find('|');
    const json j = {{"hash", key.substr(0, bar)}, {"model", key.substr(bar + 1)}, {"score", score}};
    std::ofstream out(cfg_.cache_path, std::ios::app);
    out << j.dump() << "\n";
    if (!out) throw Error("cannot append to score cache " + cfg_.cache_path);
  }

  void throttle() {
    const double gap = 1.0 / cfg_.requests_per_second;
    if (last_request_) {
      const double wait = *last_request_ + gap - clock_.now();
      if (wait > 0) clock_.sleep(wait);
    }
    last_request_ = clock_.now();
  }

  std::optional<double> request(const std::string& text) {
    const json body = {{"comment", {{"text", text}}},
                       {"requestedAttributes", {{cfg_.model, json::object()}}}};
    const std::string payload = body.dump();
    double backoff = cfg_.initial_backoff;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        clock_.sleep(backoff);
        backoff *= 2.0;
      }
      throttle();
      ++requests_;
      const HttpReply reply = transport_(payload);
      if (reply.status == 200) {
        try {
          const double v = json::parse(reply.body)
                               .at("attributeScores")
                               .at(cfg_.model)
                               .at("summaryScore")
                               .at("value")
                               .get<double>();
          if (v >= 0.0 && v <= 1.0) return v;
        } catch (const json::exception&) {
        }
        warn("scoring service returned an unusable body");
        return std::nullopt;
      }
      // quota (429), server errors and transport failures are retried
      if (reply.status != 0 && reply.status != 429 && reply.status < 500) {
        warn("scoring request rejected with HTTP " + std::to_string(reply.status));
        return std::nullopt;
      }
    }
    warn("scoring request failed after " + std::to_string(cfg_.max_retries) + " retries");
    return std::nullopt;
  }

  ClientConfig cfg_;
  Transport transport_;
  Clock clock_;
  std::map<std::string, double> cache_;
  std::optional<double> last_request_;
  std::size_t requests_ = 0;
};

}  // namespace contrail::toxicity
