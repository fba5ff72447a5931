#include "fads/corpus.hpp"

#include <algorithm>
#include <set>

#include "fads/error.hpp"
#include "records.hpp"

namespace fads {

using detail::Json;
using detail::where;

// ---------------------------------------------------------------------------
// Schema

SensitiveAttributeSchema::SensitiveAttributeSchema(std::vector<AttributeSpec> attributes)
    : attributes_(std::move(attributes)) {
  std::set<std::string> names;
  for (const auto& a : attributes_) {
    if (a.name.empty()) throw Error(ErrorKind::kInvalidArgument, "attribute name is empty");
    if (!names.insert(a.name).second)
      throw Error(ErrorKind::kInvalidArgument, "duplicate attribute " + a.name);
    std::set<std::string> seen;
    for (const auto& c : a.categories) {
      if (c.empty())
        throw Error(ErrorKind::kInvalidArgument, "empty category in attribute " + a.name);
      if (!seen.insert(c).second)
        throw Error(ErrorKind::kInvalidArgument,
                    "duplicate category " + c + " in attribute " + a.name);
    }
    if (a.categories.size() < 2)
      throw Error(ErrorKind::kInvalidArgument,
                  "attribute " + a.name + " needs at least 2 categories");
    auto effective = a.categories;
    if (a.allow_unknown && !seen.contains(std::string(kUnknownCategory)))
      effective.emplace_back(kUnknownCategory);
    categories_.push_back(std::move(effective));
  }
}

std::optional<std::size_t> SensitiveAttributeSchema::find(std::string_view attribute) const {
  for (std::size_t a = 0; a < attributes_.size(); ++a)
    if (attributes_[a].name == attribute) return a;
  return std::nullopt;
}

std::size_t SensitiveAttributeSchema::index_of(std::string_view attribute) const {
  if (auto a = find(attribute)) return *a;
  throw Error(ErrorKind::kUnknownAttribute, std::string(attribute));
}

std::optional<std::size_t> SensitiveAttributeSchema::category_index(std::size_t a,
                                                                    std::string_view value) const {
  const auto& cats = categories_[a];
  for (std::size_t c = 0; c < cats.size(); ++c)
    if (cats[c] == value) return c;
  return std::nullopt;
}

std::vector<std::string> SensitiveAttributeSchema::names() const {
  std::vector<std::string> out;
  for (const auto& a : attributes_) out.push_back(a.name);
  return out;
}

SensitiveAttributeSchema load_schema(const std::filesystem::path& path) {
  std::vector<AttributeSpec> specs;
  for (const auto& rec : detail::read_records(path)) {
    const auto& j = rec.value;
    try {
      AttributeSpec spec;
      spec.name = j.at("name").get<std::string>();
      spec.categories = j.at("categories").get<std::vector<std::string>>();
      spec.allow_unknown = j.value("allow_unknown", false);
      specs.push_back(std::move(spec));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kMalformedRecord, where(path, rec.line_no) + ": " + e.what());
    }
  }
  return SensitiveAttributeSchema(std::move(specs));
}

void save_schema(const SensitiveAttributeSchema& schema, const std::filesystem::path& path) {
  std::vector<Json> out;
  for (std::size_t a = 0; a < schema.size(); ++a) {
    const auto& s = schema.spec(a);
    out.push_back({{"name", s.name}, {"categories", s.categories}, {"allow_unknown", s.allow_unknown}});
  }
  detail::write_records(path, out);
}

// ---------------------------------------------------------------------------
// Record parsing

namespace {

struct ParsedRow {
  std::string id;
  std::optional<int> label;
  std::optional<std::vector<std::size_t>> attributes;
  std::string payload;
  std::optional<std::vector<float>> inline_embedding;
  std::optional<std::size_t> embedding_index;
};

std::vector<std::size_t> parse_attributes(const Json& attrs, const SensitiveAttributeSchema& schema,
                                          const std::string& id, const std::string& loc) {
  if (!attrs.is_object())
    throw Error(ErrorKind::kMalformedRecord, loc + ": attributes must be a string map");
  std::vector<std::size_t> codes(schema.size());
  for (std::size_t a = 0; a < schema.size(); ++a) {
    const auto it = attrs.find(schema.name(a));
    if (it == attrs.end())
      throw Error(ErrorKind::kMissingAttribute, loc + ": record " + id + " lacks " + schema.name(a));
    if (!it->is_string())
      throw Error(ErrorKind::kMalformedRecord, loc + ": attribute " + schema.name(a) + " not a string");
    const auto value = it->get<std::string>();
    const auto code = schema.category_index(a, value);
    if (!code)
      throw Error(ErrorKind::kUnknownCategory,
                  "record " + id + " attribute " + schema.name(a) + " value " + value + " (" + loc + ")");
    codes[a] = *code;
  }
  return codes;
}

ParsedRow parse_row(const detail::Record& rec, const std::filesystem::path& path,
                    const SensitiveAttributeSchema& schema, bool label_required,
                    bool attributes_required) {
  const auto& j = rec.value;
  const std::string loc = where(path, rec.line_no);
  ParsedRow row;
  try {
    const auto& id = j.at("id");
    if (!id.is_string() || id.get<std::string>().empty())
      throw Error(ErrorKind::kMalformedRecord, loc + ": id must be a non-empty string");
    row.id = id.get<std::string>();

    if (const auto it = j.find("label"); it != j.end() && !it->is_null()) {
      if (!it->is_number_integer())
        throw Error(ErrorKind::kMalformedRecord, loc + ": label must be an integer");
      const auto v = it->get<long long>();
      if (v != 0 && v != 1)
        throw Error(ErrorKind::kInvalidLabel,
                    loc + ": record " + row.id + " label " + std::to_string(v) + " is not binary");
      row.label = static_cast<int>(v);
    } else if (label_required) {
      throw Error(ErrorKind::kMalformedRecord, loc + ": missing label");
    }

    if (const auto it = j.find("attributes"); it != j.end() && !it->is_null()) {
      row.attributes = parse_attributes(*it, schema, row.id, loc);
    } else if (attributes_required) {
      throw Error(ErrorKind::kMalformedRecord, loc + ": missing attributes");
    }

    if (const auto it = j.find("payload"); it != j.end()) {
      if (!it->is_string()) throw Error(ErrorKind::kMalformedRecord, loc + ": payload must be a string");
      row.payload = it->get<std::string>();
    }

    if (const auto it = j.find("embedding"); it != j.end()) {
      if (!it->is_array()) throw Error(ErrorKind::kMalformedRecord, loc + ": embedding must be an array");
      std::vector<float> v;
      v.reserve(it->size());
      for (const auto& x : *it) {
        if (!x.is_number()) throw Error(ErrorKind::kMalformedRecord, loc + ": embedding entry not a number");
        v.push_back(static_cast<float>(x.get<double>()));
      }
      row.inline_embedding = std::move(v);
    }
    if (const auto it = j.find("embedding_index"); it != j.end()) {
      if (!it->is_number_unsigned())
        throw Error(ErrorKind::kMalformedRecord, loc + ": embedding_index must be a non-negative integer");
      row.embedding_index = it->get<std::size_t>();
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kMalformedRecord, loc + ": " + e.what());
  }
  return row;
}

/// Resolves every row's vector (inline or sidecar) into one matrix whose row i
/// belongs to parsed row i.
EmbeddingMatrix gather_embeddings(const std::vector<ParsedRow>& rows,
                                  const std::vector<std::size_t>& line_nos,
                                  const std::filesystem::path& path,
                                  const std::optional<std::filesystem::path>& embeddings_path) {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (const auto& r : rows) ids.push_back(r.id);
  {
    std::set<std::string_view> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second) throw Error(ErrorKind::kDuplicateId, id);
  }
  if (rows.empty()) return EmbeddingMatrix{};

  std::vector<float> data;
  std::size_t dim = 0;
  if (embeddings_path) {
    const auto sidecar = read_embedding_sidecar(*embeddings_path);
    dim = sidecar.dim();
    data.reserve(rows.size() * dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const std::string loc = where(path, line_nos[i]);
      if (r.inline_embedding)
        throw Error(ErrorKind::kMalformedRecord, loc + ": inline embedding given alongside a sidecar");
      if (!r.embedding_index) throw Error(ErrorKind::kMalformedRecord, loc + ": missing embedding_index");
      if (*r.embedding_index >= sidecar.row_count())
        throw Error(ErrorKind::kEmbeddingIndexOutOfRange,
                    loc + ": index " + std::to_string(*r.embedding_index) + " >= " +
                        std::to_string(sidecar.row_count()));
      const auto src = sidecar.row(*r.embedding_index);
      data.insert(data.end(), src.begin(), src.end());
    }
  } else {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const std::string loc = where(path, line_nos[i]);
      if (!r.inline_embedding)
        throw Error(ErrorKind::kMalformedRecord, loc + ": missing inline embedding (no sidecar given)");
      if (i == 0) {
        dim = r.inline_embedding->size();
        if (dim == 0) throw Error(ErrorKind::kMalformedRecord, loc + ": empty embedding");
        data.reserve(rows.size() * dim);
      } else if (r.inline_embedding->size() != dim) {
        throw Error(ErrorKind::kDimensionMismatch,
                    loc + ": expected " + std::to_string(dim) + ", got " +
                        std::to_string(r.inline_embedding->size()));
      }
      data.insert(data.end(), r.inline_embedding->begin(), r.inline_embedding->end());
    }
  }
  return EmbeddingMatrix(dim, std::move(data), std::move(ids));
}

Json attributes_json(const SensitiveAttributeSchema& schema, const std::vector<std::size_t>& codes) {
  Json attrs = Json::object();
  for (std::size_t a = 0; a < schema.size(); ++a) attrs[schema.name(a)] = schema.categories(a)[codes[a]];
  return attrs;
}

Json embedding_json(std::span<const float> v) {
  Json arr = Json::array();
  for (float x : v) arr.push_back(static_cast<double>(x));
  return arr;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pool

Pool::Pool(SensitiveAttributeSchema schema, std::vector<LabeledExample> examples,
           EmbeddingMatrix embeddings)
    : schema_(std::move(schema)), examples_(std::move(examples)), embeddings_(std::move(embeddings)) {
  if (examples_.size() != embeddings_.row_count())
    throw Error(ErrorKind::kDimensionMismatch,
                "pool has " + std::to_string(examples_.size()) + " examples but " +
                    std::to_string(embeddings_.row_count()) + " embedding rows");
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const auto& e = examples_[i];
    if (e.embedding_row != i || embeddings_.id(i) != e.id)
      throw Error(ErrorKind::kInvalidArgument, "example " + e.id + " is not bound to embedding row " +
                                                   std::to_string(i));
    if (e.label != 0 && e.label != 1) throw Error(ErrorKind::kInvalidLabel, e.id);
    if (e.attributes.size() != schema_.size())
      throw Error(ErrorKind::kMissingAttribute, "example " + e.id);
    for (std::size_t a = 0; a < schema_.size(); ++a)
      if (e.attributes[a] >= schema_.category_count(a))
        throw Error(ErrorKind::kUnknownCategory, "example " + e.id + " attribute " + schema_.name(a));
  }
}

Pool Pool::subset(std::span<const std::size_t> rows) const {
  std::vector<LabeledExample> ex;
  ex.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ex.push_back(examples_[rows[i]]);
    ex.back().embedding_row = i;
  }
  return Pool(schema_, std::move(ex), embeddings_.select_rows(rows));
}

Pool load_pool(const std::filesystem::path& examples_path,
               const std::optional<std::filesystem::path>& embeddings_path,
               const SensitiveAttributeSchema& schema) {
  const auto records = detail::read_records(examples_path);
  std::vector<ParsedRow> rows;
  std::vector<std::size_t> line_nos;
  rows.reserve(records.size());
  for (const auto& rec : records) {
    rows.push_back(parse_row(rec, examples_path, schema, true, true));
    line_nos.push_back(rec.line_no);
  }
  auto matrix = gather_embeddings(rows, line_nos, examples_path, embeddings_path);
  std::vector<LabeledExample> examples;
  examples.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& r = rows[i];
    examples.push_back({std::move(r.id), *r.label, std::move(*r.attributes), std::move(r.payload), i});
  }
  return Pool(schema, std::move(examples), std::move(matrix));
}

void save_pool(const Pool& pool, const std::filesystem::path& examples_path,
               const std::optional<std::filesystem::path>& embeddings_path) {
  std::vector<Json> out;
  out.reserve(pool.size());
  for (const auto& e : pool.examples()) {
    Json j = {{"id", e.id},
              {"label", e.label},
              {"attributes", attributes_json(pool.schema(), e.attributes)},
              {"payload", e.payload}};
    if (embeddings_path)
      j["embedding_index"] = e.embedding_row;
    else
      j["embedding"] = embedding_json(pool.embeddings().row(e.embedding_row));
    out.push_back(std::move(j));
  }
  detail::write_records(examples_path, out);
  if (embeddings_path) write_embedding_sidecar(*embeddings_path, pool.embeddings());
}

QuerySet load_queries(const std::filesystem::path& path,
                      const std::optional<std::filesystem::path>& embeddings_path,
                      const SensitiveAttributeSchema& schema) {
  const auto records = detail::read_records(path);
  std::vector<ParsedRow> rows;
  std::vector<std::size_t> line_nos;
  for (const auto& rec : records) {
    rows.push_back(parse_row(rec, path, schema, false, false));
    line_nos.push_back(rec.line_no);
  }
  QuerySet qs;
  qs.schema = schema;
  qs.embeddings = gather_embeddings(rows, line_nos, path, embeddings_path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& r = rows[i];
    qs.queries.push_back({std::move(r.id), std::move(r.payload), i, r.label, std::move(r.attributes)});
  }
  return qs;
}

void save_queries(const QuerySet& queries, const std::filesystem::path& path,
                  const std::optional<std::filesystem::path>& embeddings_path) {
  std::vector<Json> out;
  for (const auto& q : queries.queries) {
    Json j = {{"id", q.id}, {"payload", q.payload}};
    if (q.ground_truth) j["label"] = *q.ground_truth;
    if (q.attributes) j["attributes"] = attributes_json(queries.schema, *q.attributes);
    if (embeddings_path)
      j["embedding_index"] = q.embedding_row;
    else
      j["embedding"] = embedding_json(queries.embeddings.row(q.embedding_row));
    out.push_back(std::move(j));
  }
  detail::write_records(path, out);
  if (embeddings_path) write_embedding_sidecar(*embeddings_path, queries.embeddings);
}

// ---------------------------------------------------------------------------
// Predictions

void save_predictions(std::span<const PredictionRecord> records, const std::filesystem::path& path) {
  std::set<std::string_view> seen;
  std::vector<Json> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!seen.insert(r.query_id).second) throw Error(ErrorKind::kDuplicateId, r.query_id);
    out.push_back({{"query_id", r.query_id}, {"prediction", r.prediction}, {"raw_response", r.raw_response}});
  }
  detail::write_records(path, out);
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::vector<PredictionRecord> out;
  for (const auto& rec : detail::read_records(path)) {
    try {
      PredictionRecord r;
      r.query_id = rec.value.at("query_id").get<std::string>();
      r.prediction = rec.value.at("prediction").get<int>();
      r.raw_response = rec.value.value("raw_response", std::string{});
      if (r.prediction != 0 && r.prediction != 1)
        throw Error(ErrorKind::kInvalidLabel, where(path, rec.line_no));
      out.push_back(std::move(r));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kMalformedRecord, where(path, rec.line_no) + ": " + e.what());
    }
  }
  return out;
}

std::map<std::string, std::size_t> subgroup_counts(const Pool& pool, std::string_view attribute) {
  const std::size_t a = pool.schema().index_of(attribute);
  std::vector<std::size_t> counts(pool.schema().category_count(a), 0);
  for (const auto& e : pool.examples()) ++counts[e.attributes[a]];
  std::map<std::string, std::size_t> out;
  for (std::size_t c = 0; c < counts.size(); ++c) out[pool.schema().categories(a)[c]] = counts[c];
  return out;
}

}  // namespace fads
