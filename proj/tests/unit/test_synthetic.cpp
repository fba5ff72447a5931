#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <numeric>

#include "fads/error.hpp"
#include "fads/metrics.hpp"
#include "fads/selectors.hpp"
#include "fads/synthetic.hpp"
#include "fads/vectorspace.hpp"
#include "fixtures.hpp"

using namespace fads;
using fads::testing::TempDir;

namespace {

/// Pearson chi-square p-value for independence of cluster and category.
double independence_p_value(const Pool& pool, const ClusterModel& model, std::size_t attr) {
  const std::size_t cats = pool.schema().category_count(attr);
  std::vector<std::vector<double>> table(model.k, std::vector<double>(cats, 0));
  for (std::size_t r = 0; r < pool.size(); ++r) table[model.assignment[r]][pool.example(r).attributes[attr]] += 1;
  std::vector<double> rows(model.k, 0), cols(cats, 0);
  double n = 0;
  for (std::size_t i = 0; i < model.k; ++i)
    for (std::size_t j = 0; j < cats; ++j) rows[i] += table[i][j], cols[j] += table[i][j], n += table[i][j];
  double stat = 0;
  std::size_t live_rows = 0, live_cols = 0;
  for (std::size_t i = 0; i < model.k; ++i) live_rows += rows[i] > 0;
  for (std::size_t j = 0; j < cats; ++j) live_cols += cols[j] > 0;
  for (std::size_t i = 0; i < model.k; ++i)
    for (std::size_t j = 0; j < cats; ++j) {
      const double e = rows[i] * cols[j] / n;
      if (e > 0) stat += (table[i][j] - e) * (table[i][j] - e) / e;
    }
  boost::math::chi_squared dist(static_cast<double>((live_rows - 1) * (live_cols - 1)));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST(ExactQuotas, LargestRemainder) {
  EXPECT_EQ(exact_quotas(10, {0.5, 0.5}), (std::vector<std::size_t>{5, 5}));
  EXPECT_EQ(exact_quotas(10, {0.86, 0.14, 0.0}), (std::vector<std::size_t>{9, 1, 0}));
  EXPECT_EQ(exact_quotas(7, {1.0 / 3, 1.0 / 3, 1.0 / 3}), (std::vector<std::size_t>{3, 2, 2}));
  EXPECT_EQ(exact_quotas(2000, {0.6, 0.25, 0.15}), (std::vector<std::size_t>{1200, 500, 300}));
  EXPECT_EQ(exact_quotas(0, {0.3, 0.7}), (std::vector<std::size_t>{0, 0}));
  for (std::size_t n : {1u, 13u, 999u}) {
    const auto q = exact_quotas(n, {0.2, 0.45, 0.35});
    EXPECT_EQ(std::accumulate(q.begin(), q.end(), std::size_t{0}), n);
  }
}

TEST(ExactQuotas, RejectsBadProportions) {
  for (const auto& p : std::vector<std::vector<double>>{{0.5, 0.4}, {1.2, -0.2}, {}}) {
    try {
      exact_quotas(10, p);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kBadProportions);
    }
  }
}

TEST(Generator, CountsFollowProportionsExactly) {
  auto spec = fads::testing::small_spec({fads::testing::gender(0.75), fads::testing::race({0.6, 0.25, 0.15})}, 2000, 1,
                                        200);
  spec.positive_rate = 0.3;
  const auto d = generate_synthetic(spec);
  const auto g = subgroup_counts(d.pool, "gender");
  EXPECT_EQ(g.at("Male"), 1500u);
  EXPECT_EQ(g.at("Female"), 500u);
  const auto r = subgroup_counts(d.pool, "race");
  EXPECT_EQ(r.at("White"), 1200u);
  EXPECT_EQ(r.at("Asian"), 300u);
  std::size_t positives = 0;
  for (const auto& e : d.pool.examples()) positives += e.label;
  EXPECT_EQ(positives, 600u);
  std::size_t q_male = 0, q_pos = 0;
  for (const auto& q : d.queries.queries) {
    q_male += (*q.attributes)[0] == 0;
    q_pos += *q.ground_truth;
  }
  EXPECT_EQ(q_male, 150u);
  EXPECT_EQ(q_pos, 60u);
  EXPECT_EQ(d.pool.embeddings().dim(), 16u);
  EXPECT_EQ(d.pool.example(0).id, "p00001");
  EXPECT_EQ(d.queries.queries.back().id, "q00200");
}

TEST(Generator, DeterministicPerSeed) {
  const auto spec = fads::testing::small_spec({fads::testing::gender()}, 300, 4);
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  auto other = spec;
  other.seed = 5;
  const auto c = generate_synthetic(other);
  EXPECT_EQ(a.pool.embeddings().data(), b.pool.embeddings().data());
  EXPECT_NE(a.pool.embeddings().data(), c.pool.embeddings().data());
}

TEST(Generator, RejectsBadSpecs) {
  auto spec = fads::testing::small_spec({{"gender", {"Male", "Female"}, {0.7, 0.2}}}, 100, 1);
  EXPECT_THROW(generate_synthetic(spec), Error);
  spec = fads::testing::small_spec({fads::testing::gender()}, 100, 1);
  spec.positive_rate = 1.5;
  EXPECT_THROW(generate_synthetic(spec), Error);
}

// With zero leakage the clustering must not see the sensitive attributes.
TEST(Generator, ZeroLeakageIsIndependentOfClusters) {
  int rejections = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto spec = fads::testing::small_spec({fads::testing::gender(0.6), fads::testing::race()}, 2000, seed);
    spec.leakage = 0.0;
    const auto d = generate_synthetic(spec);
    const auto model = cluster_pool(d.pool, 8, seed);
    for (std::size_t a = 0; a < 2; ++a) rejections += independence_p_value(d.pool, model, a) < 0.01;
  }
  // 20 tests at alpha 0.01: more than 2 rejections is vanishingly unlikely under independence.
  EXPECT_LE(rejections, 2);
}

TEST(Generator, LeakageEntanglesClusters) {
  auto spec = fads::testing::small_spec({fads::testing::gender(0.6)}, 2000, 3);
  spec.leakage = 2.0;
  const auto d = generate_synthetic(spec);
  const auto model = cluster_pool(d.pool, 8, 3);
  EXPECT_LT(independence_p_value(d.pool, model, 0), 1e-6);
}

TEST(Generator, SkewedEthnicityShowsInRandomSets) {
  SyntheticAttribute eth{"ethnicity", {"Non-Hispanic", "Hispanic"}, {0.86, 0.14, 0.0}, true};
  const auto d = generate_synthetic(fads::testing::small_spec({eth}, 3000, 9, 20));
  const auto counts = subgroup_counts(d.pool, "ethnicity");
  EXPECT_EQ(counts.at("Unknown"), 0u);
  EXPECT_EQ(counts.at("Hispanic"), 420u);
  double total = 0;
  for (std::size_t q = 0; q < 20; ++q) {
    SelectionRequest req;
    req.query_id = d.queries.queries[q].id;
    req.query_embedding = d.queries.embedding(q);
    req.shots = 400;
    const auto s = select_random(d.pool, req);
    total += composition_maxdiff(s, "ethnicity");
  }
  EXPECT_NEAR(total / 20, 0.86, 0.05);
}

TEST(Generator, FilesLoadBack) {
  TempDir dir;
  for (bool sidecar : {false, true}) {
    const auto spec = fads::testing::small_spec({fads::testing::gender(), fads::testing::race()}, 120, 2, 30);
    const auto d = generate_synthetic(spec);
    const auto out = dir / (sidecar ? "side" : "inline");
    write_synthetic(d, out, sidecar);
    const auto schema = load_schema(out / "schema.records");
    EXPECT_EQ(schema.names(), (std::vector<std::string>{"gender", "race"}));
    const auto pool = load_pool(out / "pool.records",
                                sidecar ? std::optional(out / "pool.emb") : std::nullopt, schema);
    ASSERT_EQ(pool.size(), 120u);
    EXPECT_EQ(pool.embeddings().data(), d.pool.embeddings().data());
    EXPECT_EQ(pool.example(7).payload, d.pool.example(7).payload);
    const auto queries = load_queries(out / "queries.records",
                                      sidecar ? std::optional(out / "queries.emb") : std::nullopt, schema);
    ASSERT_EQ(queries.queries.size(), 30u);
    EXPECT_EQ(queries.queries[3].attributes, d.queries.queries[3].attributes);
    EXPECT_EQ(std::filesystem::exists(out / "pool.emb"), sidecar);
  }
}
