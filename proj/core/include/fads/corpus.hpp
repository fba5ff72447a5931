#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fads/embedding_matrix.hpp"

namespace fads {

inline constexpr std::string_view kUnknownCategory = "Unknown";

struct AttributeSpec {
  std::string name;
  std::vector<std::string> categories;
  bool allow_unknown = false;
};

/// Ordered sensitive attributes. When an attribute allows unknowns, the
/// literal "Unknown" is a first-class category appended after the declared
/// ones (unless already declared).
class SensitiveAttributeSchema {
 public:
  SensitiveAttributeSchema() = default;
  explicit SensitiveAttributeSchema(std::vector<AttributeSpec> attributes);

  std::size_t size() const noexcept { return attributes_.size(); }
  const AttributeSpec& spec(std::size_t a) const { return attributes_[a]; }
  const std::string& name(std::size_t a) const { return attributes_[a].name; }

  /// Effective categories, "Unknown" included where allowed.
  const std::vector<std::string>& categories(std::size_t a) const { return categories_[a]; }
  std::size_t category_count(std::size_t a) const { return categories_[a].size(); }

  std::optional<std::size_t> find(std::string_view attribute) const;
  /// Throws UnknownAttribute.
  std::size_t index_of(std::string_view attribute) const;
  std::optional<std::size_t> category_index(std::size_t a, std::string_view value) const;

  std::vector<std::string> names() const;

 private:
  std::vector<AttributeSpec> attributes_;
  std::vector<std::vector<std::string>> categories_;
};

/// One pool item. Attribute values are stored as category codes aligned with
/// the schema's attribute order.
struct LabeledExample {
  std::string id;
  int label = 0;
  std::vector<std::size_t> attributes;
  std::string payload;
  std::size_t embedding_row = 0;
};

struct QueryExample {
  std::string id;
  std::string payload;
  std::size_t embedding_row = 0;
  std::optional<int> ground_truth;
  /// Evaluation-only; selectors never read it.
  std::optional<std::vector<std::size_t>> attributes;
};

/// Immutable labeled pool. Example i owns embedding row i.
class Pool {
 public:
  Pool(SensitiveAttributeSchema schema, std::vector<LabeledExample> examples,
       EmbeddingMatrix embeddings);

  const SensitiveAttributeSchema& schema() const noexcept { return schema_; }
  const std::vector<LabeledExample>& examples() const noexcept { return examples_; }
  const LabeledExample& example(std::size_t i) const { return examples_[i]; }
  std::size_t size() const noexcept { return examples_.size(); }
  const EmbeddingMatrix& embeddings() const noexcept { return embeddings_; }

  std::optional<std::size_t> find(std::string_view id) const { return embeddings_.find(id); }
  const std::string& category_name(std::size_t example, std::size_t attribute) const {
    return schema_.categories(attribute)[examples_[example].attributes[attribute]];
  }

  /// Pool restricted to `rows`, renumbered in the given order.
  Pool subset(std::span<const std::size_t> rows) const;

 private:
  SensitiveAttributeSchema schema_;
  std::vector<LabeledExample> examples_;
  EmbeddingMatrix embeddings_;
};

struct QuerySet {
  SensitiveAttributeSchema schema;
  std::vector<QueryExample> queries;
  EmbeddingMatrix embeddings;

  std::span<const float> embedding(std::size_t q) const {
    return embeddings.row(queries[q].embedding_row);
  }
};

struct PredictionRecord {
  std::string query_id;
  int prediction = 0;
  std::string raw_response;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

// Schema records: one attribute per line, {"name", "categories", "allow_unknown"}.
SensitiveAttributeSchema load_schema(const std::filesystem::path& path);
void save_schema(const SensitiveAttributeSchema& schema, const std::filesystem::path& path);

/// Without `embeddings_path` every record must carry an inline "embedding";
/// with it, every record must carry "embedding_index" into the sidecar.
Pool load_pool(const std::filesystem::path& examples_path,
               const std::optional<std::filesystem::path>& embeddings_path,
               const SensitiveAttributeSchema& schema);

/// Sidecar mode writes `embedding_index` = row i and the matrix to `embeddings_path`.
void save_pool(const Pool& pool, const std::filesystem::path& examples_path,
               const std::optional<std::filesystem::path>& embeddings_path = std::nullopt);

QuerySet load_queries(const std::filesystem::path& path,
                      const std::optional<std::filesystem::path>& embeddings_path,
                      const SensitiveAttributeSchema& schema);
void save_queries(const QuerySet& queries, const std::filesystem::path& path,
                  const std::optional<std::filesystem::path>& embeddings_path = std::nullopt);

void save_predictions(std::span<const PredictionRecord> records, const std::filesystem::path& path);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

/// Every schema category appears, zero-filled.
std::map<std::string, std::size_t> subgroup_counts(const Pool& pool, std::string_view attribute);

}  // namespace fads
