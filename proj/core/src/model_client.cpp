#include "fads/model_client.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fads/error.hpp"
#include "fads/random.hpp"

namespace fads {

namespace {

class OracleClient final : public ModelClient {
 public:
  OracleClient(OracleOptions options, std::vector<std::size_t> attributes)
      : options_(std::move(options)), attributes_(std::move(attributes)) {}

  std::string complete(const ClientRequest& r) override {
    const int answer = synthetic_oracle_predict(r.pool, r.set, r.query, attributes_, options_);
    return answer == 1 ? "Answer: yes" : "Answer: no";
  }

 private:
  OracleOptions options_;
  std::vector<std::size_t> attributes_;
};

struct Endpoint {
  std::string host;
  int port = 80;
  std::string path = "/";
};

Endpoint parse_endpoint(const std::string& url) {
  constexpr std::string_view scheme = "http://";
  if (url.rfind(scheme, 0) != 0)
    throw Error(ErrorKind::kInvalidArgument, "endpoint must start with http:// (got '" + url + "')");
  Endpoint e;
  std::string rest = url.substr(scheme.size());
  const auto slash = rest.find('/');
  if (slash != std::string::npos) {
    e.path = rest.substr(slash);
    rest.resize(slash);
  }
  const auto colon = rest.rfind(':');
  if (colon != std::string::npos) {
    try {
      e.port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorKind::kInvalidArgument, "bad port in endpoint " + url);
    }
    rest.resize(colon);
  }
  if (rest.empty()) throw Error(ErrorKind::kInvalidArgument, "endpoint has no host: " + url);
  e.host = rest;
  return e;
}

std::string extract_text(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_object()) {
    if (auto it = j.find("text"); it != j.end() && it->is_string()) return it->get<std::string>();
    if (auto it = j.find("choices"); it != j.end() && it->is_array() && !it->empty()) {
      const auto& first = (*it)[0];
      if (first.is_object())
        if (auto t = first.find("text"); t != first.end() && t->is_string()) return t->get<std::string>();
    }
  }
  return body;
}

class RemoteClient final : public ModelClient {
 public:
  explicit RemoteClient(RemoteClientOptions options)
      : options_(std::move(options)),
        endpoint_(parse_endpoint(options_.endpoint)),
        slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options_.max_in_flight))) {
    if (const char* token = std::getenv(kApiTokenEnv.data())) token_ = token;
  }

  std::string complete(const ClientRequest& r) override {
    const std::string body =
        nlohmann::json{{"model", options_.model}, {"prompt", r.prompt}, {"max_tokens", options_.max_tokens}}.dump();
    std::string cause;
    auto wait = options_.backoff_base;
    for (std::size_t attempt = 0; attempt <= options_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(wait);
        wait *= 2;
      }
      bool retryable = true;
      {
        slots_.acquire();
        httplib::Client cli(endpoint_.host, endpoint_.port);
        const auto secs = std::chrono::duration<double>(options_.timeout_seconds);
        cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
        cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
        cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
        httplib::Headers headers;
        if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
        auto res = cli.Post(endpoint_.path, headers, body, "application/json");
        slots_.release();
        if (!res) {
          cause = "transport error: " + httplib::to_string(res.error());
        } else if (res->status >= 200 && res->status < 300) {
          return extract_text(res->body);
        } else {
          cause = "HTTP " + std::to_string(res->status);
          retryable = res->status == 429 || res->status >= 500;
        }
      }
      if (!retryable) break;
    }
    throw Error(ErrorKind::kClientFailure, r.query.id + ": " + cause);
  }

 private:
  RemoteClientOptions options_;
  Endpoint endpoint_;
  std::counting_semaphore<1024> slots_;
  std::string token_;
};

}  // namespace

std::unique_ptr<ModelClient> make_client(const ModelClientSpec& spec, const SensitiveAttributeSchema& schema) {
  if (const auto* o = std::get_if<OracleOptions>(&spec.options)) {
    if (!(o->p0 >= 0.0 && o->p0 <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "oracle p0 must lie in [0, 1]");
    if (!(o->beta >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "oracle beta must be >= 0");
    std::vector<std::size_t> attrs;
    if (o->attributes.empty()) {
      for (std::size_t a = 0; a < schema.size(); ++a) attrs.push_back(a);
    } else {
      for (const auto& name : o->attributes) attrs.push_back(schema.index_of(name));
    }
    return std::make_unique<OracleClient>(*o, std::move(attrs));
  }
  const auto& remote = std::get<RemoteClientOptions>(spec.options);
  if (remote.max_in_flight > 1024) throw Error(ErrorKind::kInvalidArgument, "max in flight capped at 1024");
  return std::make_unique<RemoteClient>(remote);
}

double oracle_probability(const Pool& pool, const DemonstrationSet& set, const QueryExample& query,
                          const std::vector<std::size_t>& attributes, double p0, double beta) {
  if (set.demonstrations.empty() || beta == 0.0) return std::clamp(p0, 0.0, 1.0);
  if (!query.attributes)
    throw Error(ErrorKind::kMissingAttribute, "query " + query.id + " has no attributes");
  std::vector<std::size_t> rows;
  rows.reserve(set.demonstrations.size());
  for (const auto& id : set.demonstrations) {
    const auto row = pool.find(id);
    if (!row) throw Error(ErrorKind::kUnresolvedId, id);
    rows.push_back(*row);
  }
  const double n = static_cast<double>(rows.size());
  double bias = 0.0;
  for (std::size_t a : attributes) {
    const std::size_t g = (*query.attributes)[a];
    const auto same = std::count_if(rows.begin(), rows.end(),
                                    [&](std::size_t r) { return pool.example(r).attributes[a] == g; });
    bias += static_cast<double>(same) / n - 1.0 / static_cast<double>(pool.schema().category_count(a));
  }
  return std::clamp(p0 + beta * bias, 0.0, 1.0);
}

int synthetic_oracle_predict(const Pool& pool, const DemonstrationSet& set, const QueryExample& query,
                             const std::vector<std::size_t>& attributes, const OracleOptions& options) {
  if (!query.ground_truth) throw Error(ErrorKind::kMissingGroundTruth, query.id);
  const double p = oracle_probability(pool, set, query, attributes, options.p0, options.beta);
  Rng rng(stream_seed(options.seed, query.id));
  const double u = uniform01(rng);
  return u < p ? *query.ground_truth : 1 - *query.ground_truth;
}

std::optional<int> parse_answer(std::string_view raw, const AnswerVocabulary& vocabulary) {
  const auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  std::vector<std::string> yes, no;
  for (const auto& w : vocabulary.yes) yes.push_back(lower(w));
  for (const auto& w : vocabulary.no) no.push_back(lower(w));
  std::string token;
  const auto decide = [&]() -> std::optional<int> {
    if (token.empty()) return std::nullopt;
    if (std::find(yes.begin(), yes.end(), token) != yes.end()) return 1;
    if (std::find(no.begin(), no.end(), token) != no.end()) return 0;
    return std::nullopt;
  };
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      token += static_cast<char>(std::tolower(c));
      continue;
    }
    if (auto v = decide()) return v;
    token.clear();
  }
  return decide();
}

}  // namespace fads
