#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "fads/error.hpp"
#include "fads/random.hpp"
#include "fads/synthetic.hpp"
#include "fads/vectorspace.hpp"
#include "fixtures.hpp"

using namespace fads;
using fads::testing::TempDir;

namespace {

template <class Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no fads::Error thrown";
  return ErrorKind::kIoFailure;
}

long double cosine_oracle(std::span<const float> a, std::span<const float> b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

EmbeddingMatrix random_matrix(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> data(n * dim);
  for (auto& x : data) x = normal(rng);
  return EmbeddingMatrix(dim, std::move(data));
}

/// Three well-separated Gaussian blobs of 20 points each; truth[i] is the blob.
EmbeddingMatrix blobs(std::uint64_t seed, std::vector<int>& truth) {
  Rng rng(seed);
  std::normal_distribution<float> normal(0.0f, 0.3f);
  const float centers[3][2] = {{0, 0}, {10, 0}, {0, 10}};
  std::vector<float> data;
  truth.clear();
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < 20; ++i) {
      data.push_back(centers[b][0] + normal(rng));
      data.push_back(centers[b][1] + normal(rng));
      truth.push_back(b);
    }
  return EmbeddingMatrix(2, std::move(data));
}

double inertia_oracle(const EmbeddingMatrix& m, const ClusterModel& model) {
  long double s = 0;
  for (std::size_t r = 0; r < m.row_count(); ++r) {
    const auto c = model.centroid(model.assignment[r]);
    for (std::size_t d = 0; d < m.dim(); ++d) {
      const long double diff = static_cast<long double>(m.row(r)[d]) - c[d];
      s += diff * diff;
    }
  }
  return static_cast<double>(s);
}

Pool pool_of(std::size_t n, std::uint64_t seed) {
  auto spec = fads::testing::small_spec({fads::testing::gender(0.6)}, n, seed, 1);
  return generate_synthetic(spec).pool;
}

}  // namespace

TEST(Cosine, MatchesHighPrecisionOracle) {
  const auto m = random_matrix(50, 7, 1);
  for (std::size_t i = 0; i + 1 < m.row_count(); ++i)
    EXPECT_NEAR(cosine_similarity(m.row(i), m.row(i + 1)), static_cast<double>(cosine_oracle(m.row(i), m.row(i + 1))),
                1e-12);
}

TEST(Cosine, KnownValuesAndClamp) {
  const std::vector<float> x{1, 0}, y{0, 2}, z{-3, 0};
  EXPECT_DOUBLE_EQ(cosine_similarity(x, y), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(x, z), -1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(x, x), 1.0);
  const std::vector<float> w{0.1f, 0.2f, 0.3f};
  const double self = cosine_similarity(w, w);
  EXPECT_LE(self, 1.0);
  EXPECT_NEAR(self, 1.0, 1e-15);
}

TEST(Cosine, Errors) {
  const std::vector<float> x{1, 0}, zero{0, 0}, y{1, 2, 3};
  EXPECT_EQ(kind_of([&] { cosine_similarity(x, zero); }), ErrorKind::kZeroNormVector);
  EXPECT_EQ(kind_of([&] { cosine_similarity(x, y); }), ErrorKind::kDimensionMismatch);
}

TEST(KMeans, PartitionInvariants) {
  const auto m = random_matrix(300, 5, 3);
  for (std::size_t k : {1u, 2u, 7u, 32u}) {
    const auto model = kmeans(m, k, 42);
    ASSERT_EQ(model.members.size(), k);
    std::vector<int> seen(m.row_count(), 0);
    for (std::size_t c = 0; c < k; ++c) {
      EXPECT_TRUE(std::is_sorted(model.members[c].begin(), model.members[c].end()));
      EXPECT_FALSE(model.members[c].empty()) << "cluster " << c;
      for (std::size_t r : model.members[c]) {
        ++seen[r];
        EXPECT_EQ(model.assignment[r], c);
      }
    }
    for (int s : seen) EXPECT_EQ(s, 1);
    EXPECT_NEAR(model.inertia, inertia_oracle(m, model), 1e-9 * (1.0 + model.inertia));
  }
}

TEST(KMeans, EveryPointSitsAtItsNearestCentroid) {
  const auto m = random_matrix(200, 3, 5);
  const auto model = kmeans(m, 9, 1);
  for (std::size_t r = 0; r < m.row_count(); ++r) {
    long double best = INFINITY;
    for (std::size_t c = 0; c < model.k; ++c) {
      long double d = 0;
      for (std::size_t j = 0; j < m.dim(); ++j) {
        const long double diff = static_cast<long double>(m.row(r)[j]) - model.centroid(c)[j];
        d += diff * diff;
      }
      best = std::min(best, d);
    }
    long double own = 0;
    for (std::size_t j = 0; j < m.dim(); ++j) {
      const long double diff = static_cast<long double>(m.row(r)[j]) - model.centroid(model.assignment[r])[j];
      own += diff * diff;
    }
    EXPECT_LE(own, best + 1e-9L);
  }
}

TEST(KMeans, InertiaNeverIncreases) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = random_matrix(150, 4, 100 + seed);
    const auto model = kmeans(m, 8, seed);
    ASSERT_GE(model.inertia_history.size(), 2u);
    for (std::size_t i = 1; i < model.inertia_history.size(); ++i)
      EXPECT_LE(model.inertia_history[i], model.inertia_history[i - 1] * (1.0 + 1e-9)) << "seed " << seed;
    EXPECT_DOUBLE_EQ(model.inertia_history.back(), model.inertia);
  }
}

TEST(KMeans, DeterministicForSeed) {
  const auto m = random_matrix(120, 4, 9);
  const auto a = kmeans(m, 6, 77);
  const auto b = kmeans(m, 6, 77);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.inertia_history, b.inertia_history);
}

TEST(KMeans, RecoversSeparatedBlobs) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<int> truth;
    const auto m = blobs(seed, truth);
    const auto model = kmeans(m, 3, seed);
    std::map<std::size_t, int> mapping;
    bool ok = true;
    for (std::size_t r = 0; r < m.row_count(); ++r) {
      auto [it, fresh] = mapping.emplace(model.assignment[r], truth[r]);
      if (!fresh && it->second != truth[r]) ok = false;
    }
    EXPECT_TRUE(ok && mapping.size() == 3) << "seed " << seed;
  }
}

TEST(KMeans, DuplicatePointsStillFillEveryCluster) {
  std::vector<float> data(20, 1.0f);
  data[19] = 2.0f;
  const EmbeddingMatrix m(1, data);
  const auto model = kmeans(m, 2, 0);
  EXPECT_FALSE(model.members[0].empty());
  EXPECT_FALSE(model.members[1].empty());
}

TEST(KMeans, Errors) {
  const auto m = random_matrix(5, 2, 1);
  EXPECT_EQ(kind_of([&] { kmeans(m, 6, 0); }), ErrorKind::kKTooLarge);
  EXPECT_EQ(kind_of([&] { kmeans(m, 0, 0); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([&] { kmeans(EmbeddingMatrix(2, {}), 1, 0); }), ErrorKind::kEmptyMatrix);
}

TEST(BalanceScore, HandValues) {
  const std::vector<std::size_t> even{2, 2, 2, 2};
  EXPECT_DOUBLE_EQ(balance_score(even), 0.0);
  // 4 items in one of 4 cells: (|4-1| + 3 * |0-1|) / 4 = 1.5
  const std::vector<std::size_t> lump{4, 0, 0, 0};
  EXPECT_DOUBLE_EQ(balance_score(lump), 1.5);
  // 6 items, 4 cells: uniform 1.5; |3-1.5|+|1-1.5|+|1-1.5|+|1-1.5| = 3 -> 0.5
  const std::vector<std::size_t> skew{3, 1, 1, 1};
  EXPECT_DOUBLE_EQ(balance_score(skew), 0.5);
  const std::vector<std::size_t> none{0, 0, 0, 0};
  EXPECT_EQ(kind_of([&] { balance_score(none); }), ErrorKind::kEmptyCluster);
}

TEST(BalanceScore, ModelScoresEqualRecountFromMembers) {
  const auto pool = pool_of(400, 3);
  const auto model = cluster_pool(pool, 12, 5);
  const auto scores = cluster_balance_scores(model, "gender");
  for (std::size_t c = 0; c < model.k; ++c) {
    // Independent recount from the member list.
    std::vector<long double> cells(4, 0);
    for (std::size_t r : model.members[c])
      cells[pool.example(r).attributes[0] * 2 + static_cast<std::size_t>(pool.example(r).label)] += 1;
    const long double n = model.members[c].size();
    long double dev = 0;
    for (auto v : cells) dev += std::fabs(v - n / 4);
    EXPECT_NEAR(scores[c].score, static_cast<double>(dev / n), 1e-12);
    EXPECT_DOUBLE_EQ(balance_score(pool, model.members[c], "gender", c).score, scores[c].score);
  }
}

TEST(BalanceScore, SelectionTakesLowestWithIndexTies) {
  ClusterModel model;
  model.k = 4;
  model.attribute_names = {"g"};
  model.cell_counts = {{{1, 1, 1, 1}}, {{4, 0, 0, 0}}, {{2, 2, 2, 2}}, {{0, 0, 0, 0}}};
  EXPECT_EQ(select_balanced_clusters(model, "g", 2), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(select_balanced_clusters(model, "g", 4), (std::vector<std::size_t>{0, 2, 1, 3}));
  EXPECT_TRUE(std::isinf(cluster_balance_scores(model, "g")[3].score));
  EXPECT_EQ(kind_of([&] { select_balanced_clusters(model, "g", 5); }), ErrorKind::kNdTooLarge);
  EXPECT_EQ(kind_of([&] { cluster_balance_scores(model, "h"); }), ErrorKind::kUnknownAttribute);
  EXPECT_EQ(default_n_d(64), 32u);
  EXPECT_EQ(default_n_d(5), 3u);
}

TEST(AnnotateCells, RejectsForeignPool) {
  const auto pool = pool_of(50, 1);
  auto model = kmeans(random_matrix(40, 16, 1), 3, 0);
  EXPECT_EQ(kind_of([&] { annotate_cells(model, pool); }), ErrorKind::kModelPoolMismatch);
}

TEST(TopK, MatchesExhaustiveSort) {
  const auto m = random_matrix(500, 8, 21);
  const auto queries = random_matrix(30, 8, 22);
  const std::vector<std::string> ids = m.ids();
  for (std::size_t q = 0; q < queries.row_count(); ++q) {
    std::vector<std::pair<long double, std::string>> oracle;
    for (std::size_t r = 0; r < m.row_count(); ++r) oracle.emplace_back(cosine_oracle(queries.row(q), m.row(r)), m.id(r));
    std::sort(oracle.begin(), oracle.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    for (std::size_t k : {1u, 10u, 500u, 600u}) {
      const auto got = top_k_similar(queries.row(q), ids, m, k);
      ASSERT_EQ(got.ids.size(), std::min<std::size_t>(k, 500));
      for (std::size_t i = 0; i < got.ids.size(); ++i) {
        EXPECT_EQ(got.ids[i], oracle[i].second);
        EXPECT_NEAR(got.similarities[i], static_cast<double>(oracle[i].first), 1e-12);
      }
    }
  }
}

TEST(TopK, TiesBreakByIdAndExcludeWorks) {
  const EmbeddingMatrix m(2, {1, 0, 1, 0, 1, 0, 0, 1}, {"c", "a", "b", "d"});
  const std::vector<float> q{1, 0};
  const std::vector<std::string> ids{"c", "a", "b", "d"};
  auto got = top_k_similar(q, ids, m, 3);
  EXPECT_EQ(got.ids, (std::vector<std::string>{"a", "b", "c"}));
  got = top_k_similar(q, ids, m, 3, IdSet{"a"});
  EXPECT_EQ(got.ids, (std::vector<std::string>{"b", "c", "d"}));
  EXPECT_TRUE(top_k_similar(q, ids, m, 0).ids.empty());
}

TEST(TopK, ZeroNormHandling) {
  const EmbeddingMatrix m(2, {0, 0, 1, 1}, {"z", "o"});
  const std::vector<std::string> ids{"z", "o"};
  const std::vector<float> q{1, 0}, zero{0, 0};
  const auto got = top_k_similar(q, ids, m, 5);
  EXPECT_EQ(got.ids, (std::vector<std::string>{"o"}));
  EXPECT_EQ(got.zero_norm_skipped, (std::vector<std::string>{"z"}));
  EXPECT_EQ(kind_of([&] { top_k_similar(zero, ids, m, 1); }), ErrorKind::kZeroNormVector);
  const std::vector<std::string> bad{"nope"};
  EXPECT_EQ(kind_of([&] { top_k_similar(q, bad, m, 1); }), ErrorKind::kUnresolvedId);
}

TEST(ClusterModelFile, RoundTrip) {
  TempDir dir;
  const auto pool = pool_of(200, 8);
  const auto model = cluster_pool(pool, 7, 3);
  save_cluster_model(model, pool, dir / "m.records");
  const auto back = load_cluster_model(dir / "m.records", pool);
  EXPECT_EQ(back.k, model.k);
  EXPECT_EQ(back.assignment, model.assignment);
  EXPECT_EQ(back.members, model.members);
  EXPECT_EQ(back.centroids, model.centroids);
  EXPECT_EQ(back.cell_counts, model.cell_counts);
  EXPECT_DOUBLE_EQ(back.inertia, model.inertia);

  const auto other = pool_of(150, 8);
  EXPECT_EQ(kind_of([&] { load_cluster_model(dir / "m.records", other); }), ErrorKind::kModelPoolMismatch);
}
