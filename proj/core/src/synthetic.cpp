#include "fads/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "fads/error.hpp"
#include "fads/random.hpp"

namespace fads {

namespace {

std::string make_id(char prefix, std::size_t i, std::size_t n) {
  const int width = std::max(5, static_cast<int>(std::to_string(n).size()));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i + 1);
  return buf;
}

std::vector<double> gaussian_vector(Rng& rng, std::size_t dim, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = scale * normal(rng);
  return v;
}

/// `quotas[c]` copies of code c, shuffled.
std::vector<std::size_t> shuffled_codes(Rng& rng, const std::vector<std::size_t>& quotas) {
  std::vector<std::size_t> codes;
  for (std::size_t c = 0; c < quotas.size(); ++c) codes.insert(codes.end(), quotas[c], c);
  std::shuffle(codes.begin(), codes.end(), rng);
  return codes;
}

struct Geometry {
  std::vector<std::vector<double>> topic_centers;
  std::vector<std::vector<double>> label_offsets;
  std::vector<std::vector<std::vector<double>>> attribute_offsets;
};

struct Drawn {
  std::vector<int> labels;
  std::vector<std::vector<std::size_t>> codes;  // [item][attribute]
  std::vector<float> embeddings;
  std::vector<std::size_t> topics;
};

Drawn draw(Rng& rng, const SyntheticSpec& spec, const SensitiveAttributeSchema& schema, const Geometry& geo,
           std::size_t n) {
  Drawn d;
  const auto positives = exact_quotas(n, {1.0 - spec.positive_rate, spec.positive_rate});
  const auto label_codes = shuffled_codes(rng, positives);
  d.labels.assign(label_codes.begin(), label_codes.end());
  d.codes.assign(n, std::vector<std::size_t>(schema.size()));
  for (std::size_t a = 0; a < schema.size(); ++a) {
    const auto codes = shuffled_codes(rng, exact_quotas(n, spec.attributes[a].proportions));
    for (std::size_t i = 0; i < n; ++i) d.codes[i][a] = codes[i];
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  d.embeddings.resize(n * spec.dim);
  d.topics.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = uniform_index(rng, spec.topics);
    d.topics[i] = t;
    for (std::size_t j = 0; j < spec.dim; ++j) {
      double x = geo.topic_centers[t][j] + geo.label_offsets[static_cast<std::size_t>(d.labels[i])][j];
      for (std::size_t a = 0; a < schema.size(); ++a) x += spec.leakage * geo.attribute_offsets[a][d.codes[i][a]][j];
      x += spec.noise * normal(rng);
      d.embeddings[i * spec.dim + j] = static_cast<float>(x);
    }
  }
  return d;
}

}  // namespace

std::vector<std::size_t> exact_quotas(std::size_t n, const std::vector<double>& proportions) {
  if (proportions.empty()) throw Error(ErrorKind::kBadProportions, "no proportions");
  double sum = 0.0;
  for (double p : proportions) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorKind::kBadProportions, "negative or non-finite proportion");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorKind::kBadProportions, "proportions sum to " + std::to_string(sum));
  std::vector<std::size_t> quotas(proportions.size());
  std::vector<double> remainders(proportions.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < proportions.size(); ++c) {
    const double exact = proportions[c] * static_cast<double>(n);
    // Guard against 0.75 * 400 landing at 299.99999.
    quotas[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders[c] = exact - static_cast<double>(quotas[c]);
    assigned += quotas[c];
  }
  std::vector<std::size_t> order(proportions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return remainders[x] > remainders[y] + 1e-12; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++quotas[order[i % order.size()]];
  return quotas;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.attributes.empty()) throw Error(ErrorKind::kInvalidArgument, "synthetic spec has no attributes");
  if (spec.dim == 0 || spec.topics == 0) throw Error(ErrorKind::kInvalidArgument, "dim and topics must be positive");
  if (!(spec.positive_rate >= 0.0 && spec.positive_rate <= 1.0))
    throw Error(ErrorKind::kBadProportions, "positive rate outside [0, 1]");

  std::vector<AttributeSpec> specs;
  for (const auto& a : spec.attributes) specs.push_back({a.name, a.categories, a.allow_unknown});
  SensitiveAttributeSchema schema(specs);
  for (std::size_t a = 0; a < schema.size(); ++a)
    if (spec.attributes[a].proportions.size() != schema.category_count(a))
      throw Error(ErrorKind::kBadProportions, "attribute " + schema.name(a) + " expects " +
                                                  std::to_string(schema.category_count(a)) + " proportions");

  Rng rng(stream_seed(spec.seed, "synthetic"));
  Geometry geo;
  for (std::size_t t = 0; t < spec.topics; ++t) geo.topic_centers.push_back(gaussian_vector(rng, spec.dim, spec.topic_spread));
  for (int y = 0; y < 2; ++y) geo.label_offsets.push_back(gaussian_vector(rng, spec.dim, spec.label_separation));
  geo.attribute_offsets.resize(schema.size());
  for (std::size_t a = 0; a < schema.size(); ++a)
    for (std::size_t c = 0; c < schema.category_count(a); ++c)
      geo.attribute_offsets[a].push_back(gaussian_vector(rng, spec.dim, 1.0));

  const auto pool_draw = draw(rng, spec, schema, geo, spec.pool_size);
  const auto query_draw = draw(rng, spec, schema, geo, spec.query_count);

  std::vector<LabeledExample> examples;
  std::vector<std::string> pool_ids;
  for (std::size_t i = 0; i < spec.pool_size; ++i) {
    auto id = make_id('p', i, spec.pool_size);
    examples.push_back({id, pool_draw.labels[i], pool_draw.codes[i],
                        "case " + id + " topic " + std::to_string(pool_draw.topics[i]), i});
    pool_ids.push_back(std::move(id));
  }
  Pool pool(schema, std::move(examples), EmbeddingMatrix(spec.dim, pool_draw.embeddings, pool_ids));

  QuerySet queries{schema, {}, EmbeddingMatrix(spec.dim, {}, {})};
  std::vector<std::string> query_ids;
  for (std::size_t i = 0; i < spec.query_count; ++i) {
    auto id = make_id('q', i, spec.query_count);
    queries.queries.push_back({id, "case " + id + " topic " + std::to_string(query_draw.topics[i]), i,
                               query_draw.labels[i], query_draw.codes[i]});
    query_ids.push_back(std::move(id));
  }
  queries.embeddings = EmbeddingMatrix(spec.dim, query_draw.embeddings, query_ids);
  return {std::move(schema), std::move(pool), std::move(queries)};
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir, bool sidecar) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
  save_schema(data.schema, dir / "schema.records");
  if (sidecar) {
    save_pool(data.pool, dir / "pool.records", dir / "pool.emb");
    save_queries(data.queries, dir / "queries.records", dir / "queries.emb");
  } else {
    save_pool(data.pool, dir / "pool.records");
    save_queries(data.queries, dir / "queries.records");
  }
}

}  // namespace fads
