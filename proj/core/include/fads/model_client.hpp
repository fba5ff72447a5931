#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fads/corpus.hpp"
#include "fads/demonstration_set.hpp"

namespace fads {

/// Plain HTTP completion endpoint: POST {model, prompt, max_tokens}, answer
/// read from the response's "text" field.
struct RemoteClientOptions {
  std::string endpoint;  // http://host[:port]/path
  std::string model;
  double timeout_seconds = 30.0;
  /// Retries after the first failed attempt; waits double from backoff_base.
  std::size_t max_retries = 3;
  std::chrono::milliseconds backoff_base{1000};
  std::size_t max_tokens = 16;
  std::size_t max_in_flight = 4;
};

/// Biased stand-in for a multimodal model.
struct OracleOptions {
  double p0 = 0.65;
  double beta = 0.0;
  std::uint64_t seed = 0;
  /// Attributes feeding the bias term; empty = every schema attribute.
  std::vector<std::string> attributes;
};

struct ModelClientSpec {
  std::variant<OracleOptions, RemoteClientOptions> options;

  bool is_oracle() const noexcept { return std::holds_alternative<OracleOptions>(options); }
};

inline constexpr std::string_view kApiTokenEnv = "FADS_API_TOKEN";

struct ClientRequest {
  const Pool& pool;
  const QueryExample& query;
  const DemonstrationSet& set;
  const std::string& prompt;
};

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  /// Raw model text. Throws ClientFailure when the model cannot answer.
  virtual std::string complete(const ClientRequest& request) = 0;
};

/// Throws InvalidArgument for a malformed spec (bad endpoint, p0 outside [0,1], beta < 0).
std::unique_ptr<ModelClient> make_client(const ModelClientSpec& spec, const SensitiveAttributeSchema& schema);

/// Correct-answer probability
///   clamp(p0 + beta * sum_a (rep_a - 1/|G_a|), 0, 1)
/// where rep_a is the share of demonstrations sharing the query's category in
/// attribute a. An empty set carries no bias (p0).
double oracle_probability(const Pool& pool, const DemonstrationSet& set, const QueryExample& query,
                          const std::vector<std::size_t>& attributes, double p0, double beta);

/// Oracle draw for one query: one uniform from the stream keyed by
/// (seed, query id); ground truth below p, its complement otherwise.
/// Throws MissingGroundTruth.
int synthetic_oracle_predict(const Pool& pool, const DemonstrationSet& set, const QueryExample& query,
                             const std::vector<std::size_t>& attributes, const OracleOptions& options);

struct AnswerVocabulary {
  std::vector<std::string> yes = {"yes", "positive"};
  std::vector<std::string> no = {"no", "negative"};
};

/// First standalone token (case-insensitive, split on non-alphanumerics)
/// found in either list decides; nullopt when none occurs.
std::optional<int> parse_answer(std::string_view raw, const AnswerVocabulary& vocabulary = {});

}  // namespace fads
