#include "fads/vectorspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fads/error.hpp"
#include "fads/random.hpp"
#include "records.hpp"

namespace fads {

using detail::Json;

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

double squared_distance(std::span<const float> x, std::span<const double> c) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - c[i];
    s += d * d;
  }
  return s;
}

double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

struct Assignment {
  std::vector<std::size_t> cluster;
  std::vector<double> distance;  // squared
  double inertia = 0.0;
};

void assign(const EmbeddingMatrix& m, const std::vector<double>& centroids, std::size_t k,
            Assignment& out) {
  const std::size_t dim = m.dim();
  out.inertia = 0.0;
  for (std::size_t r = 0; r < m.row_count(); ++r) {
    const auto x = m.row(r);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = squared_distance(x, {centroids.data() + c * dim, dim});
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    out.cluster[r] = best;
    out.distance[r] = best_d;
    out.inertia += best_d;
  }
}

std::vector<double> kmeans_plus_plus(const EmbeddingMatrix& m, std::size_t k, Rng& rng) {
  const std::size_t n = m.row_count();
  const std::size_t dim = m.dim();
  std::vector<double> centroids;
  centroids.reserve(k * dim);
  std::vector<bool> chosen(n, false);
  auto take = [&](std::size_t r) {
    chosen[r] = true;
    for (float v : m.row(r)) centroids.push_back(v);
  };
  take(uniform_index(rng, n));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    const std::span<const double> last(centroids.data() + (c - 1) * dim, dim);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      d2[r] = std::min(d2[r], squared_distance(m.row(r), last));
      total += d2[r];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        if (d2[r] <= 0.0) continue;
        acc += d2[r];
        pick = r;
        if (acc > target) break;
      }
    } else {
      // Every point coincides with a centre already; take the next unused row.
      for (std::size_t r = 0; r < n && pick == n; ++r)
        if (!chosen[r]) pick = r;
    }
    take(pick);
  }
  return centroids;
}

}  // namespace

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::kDimensionMismatch,
                "expected " + std::to_string(a.size()) + ", got " + std::to_string(b.size()));
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::kZeroNormVector, "cosine of a zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

ClusterModel kmeans(const EmbeddingMatrix& matrix, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  const std::size_t n = matrix.row_count();
  if (n == 0) throw Error(ErrorKind::kEmptyMatrix, "kmeans over an empty matrix");
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be positive");
  if (k > n)
    throw Error(ErrorKind::kKTooLarge, "k=" + std::to_string(k) + " > n=" + std::to_string(n));
  const std::size_t dim = matrix.dim();

  Rng rng(seed);
  ClusterModel model;
  model.k = k;
  model.dim = dim;
  model.seed = seed;
  model.centroids = kmeans_plus_plus(matrix, k, rng);

  Assignment a{std::vector<std::size_t>(n), std::vector<double>(n), 0.0};
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    assign(matrix, model.centroids, k, a);
    model.inertia_history.push_back(a.inertia);
    model.iterations_run = iter + 1;

    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t r = 0; r < n; ++r) ++counts[a.cluster[r]];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t r = 0; r < n; ++r) {
        if (counts[a.cluster[r]] < 2) continue;
        if (far == n || a.distance[r] > a.distance[far]) far = r;
      }
      if (far == n) continue;  // fewer distinct donors than clusters
      --counts[a.cluster[far]];
      a.cluster[far] = c;
      a.distance[far] = 0.0;
      counts[c] = 1;
    }

    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto x = matrix.row(r);
      double* s = sums.data() + a.cluster[r] * dim;
      for (std::size_t d = 0; d < dim; ++d) s[d] += x[d];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double shift = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double next = sums[c * dim + d] / static_cast<double>(counts[c]);
        const double delta = next - model.centroids[c * dim + d];
        shift += delta * delta;
        model.centroids[c * dim + d] = next;
      }
      max_shift = std::max(max_shift, std::sqrt(shift));
    }
    if (max_shift < options.tol) break;
  }

  // Final assignment against the final centroids.
  assign(matrix, model.centroids, k, a);
  model.inertia_history.push_back(a.inertia);
  model.inertia = a.inertia;
  model.assignment = a.cluster;
  model.members.assign(k, {});
  for (std::size_t r = 0; r < n; ++r) model.members[a.cluster[r]].push_back(r);
  return model;
}

void annotate_cells(ClusterModel& model, const Pool& pool) {
  if (model.row_count() != pool.size())
    throw Error(ErrorKind::kModelPoolMismatch, "model covers " + std::to_string(model.row_count()) +
                                                   " rows, pool has " + std::to_string(pool.size()));
  const auto& schema = pool.schema();
  model.attribute_names = schema.names();
  model.cell_counts.assign(model.k, {});
  for (std::size_t c = 0; c < model.k; ++c) {
    model.cell_counts[c].resize(schema.size());
    for (std::size_t a = 0; a < schema.size(); ++a)
      model.cell_counts[c][a].assign(schema.category_count(a) * 2, 0);
  }
  for (std::size_t r = 0; r < pool.size(); ++r) {
    const auto& e = pool.example(r);
    auto& cells = model.cell_counts[model.assignment[r]];
    for (std::size_t a = 0; a < schema.size(); ++a)
      ++cells[a][ClusterModel::cell_index(e.attributes[a], e.label)];
  }
}

ClusterModel cluster_pool(const Pool& pool, std::size_t k, std::uint64_t seed,
                          const KMeansOptions& options) {
  auto model = kmeans(pool.embeddings(), k, seed, options);
  annotate_cells(model, pool);
  return model;
}

double balance_score(std::span<const std::size_t> cells) {
  const std::size_t total = std::accumulate(cells.begin(), cells.end(), std::size_t{0});
  if (total == 0) throw Error(ErrorKind::kEmptyCluster, "balance score of an empty cluster");
  const double uniform = static_cast<double>(total) / static_cast<double>(cells.size());
  double dev = 0.0;
  for (std::size_t c : cells) dev += std::abs(static_cast<double>(c) - uniform);
  return dev / static_cast<double>(total);
}

ClusterBalanceScore balance_score(const Pool& pool, std::span<const std::size_t> members,
                                  std::string_view attribute, std::size_t cluster_index) {
  const std::size_t a = pool.schema().index_of(attribute);
  if (members.empty())
    throw Error(ErrorKind::kEmptyCluster, "cluster " + std::to_string(cluster_index));
  std::vector<std::size_t> cells(pool.schema().category_count(a) * 2, 0);
  for (std::size_t r : members) {
    const auto& e = pool.example(r);
    ++cells[ClusterModel::cell_index(e.attributes[a], e.label)];
  }
  return {cluster_index, balance_score(cells), std::string(attribute)};
}

std::vector<ClusterBalanceScore> cluster_balance_scores(const ClusterModel& model,
                                                        std::string_view attribute) {
  const auto it = std::find(model.attribute_names.begin(), model.attribute_names.end(), attribute);
  if (it == model.attribute_names.end()) throw Error(ErrorKind::kUnknownAttribute, std::string(attribute));
  const std::size_t a = static_cast<std::size_t>(it - model.attribute_names.begin());
  std::vector<ClusterBalanceScore> out;
  out.reserve(model.k);
  for (std::size_t c = 0; c < model.k; ++c) {
    const auto& cells = model.cell_counts[c][a];
    const bool empty = std::all_of(cells.begin(), cells.end(), [](std::size_t v) { return v == 0; });
    out.push_back({c, empty ? std::numeric_limits<double>::infinity() : balance_score(cells),
                   std::string(attribute)});
  }
  return out;
}

std::vector<std::size_t> select_balanced_clusters(const ClusterModel& model,
                                                  std::string_view attribute, std::size_t n_d) {
  if (n_d > model.k)
    throw Error(ErrorKind::kNdTooLarge, "n_d=" + std::to_string(n_d) + " > k=" + std::to_string(model.k));
  auto scores = cluster_balance_scores(model, attribute);
  std::stable_sort(scores.begin(), scores.end(), [](const auto& x, const auto& y) {
    return x.score < y.score;
  });
  std::vector<std::size_t> out;
  out.reserve(n_d);
  for (std::size_t i = 0; i < n_d; ++i) out.push_back(scores[i].cluster_index);
  return out;
}

std::vector<ScoredRow> rank_rows(std::span<const float> query, double query_norm,
                                 std::span<const std::size_t> rows, const EmbeddingMatrix& matrix,
                                 std::size_t k, std::vector<std::size_t>* zero_norm) {
  std::vector<ScoredRow> scored;
  scored.reserve(rows.size());
  for (std::size_t r : rows) {
    const double n = matrix.row_norm(r);
    if (n == 0.0) {
      if (zero_norm) zero_norm->push_back(r);
      continue;
    }
    scored.push_back({r, std::clamp(dot(query, matrix.row(r)) / (query_norm * n), -1.0, 1.0)});
  }
  const auto before = [&](const ScoredRow& x, const ScoredRow& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    return matrix.id(x.row) < matrix.id(y.row);
  };
  if (k < scored.size()) {
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), before);
    scored.resize(k);
  } else {
    std::sort(scored.begin(), scored.end(), before);
  }
  return scored;
}

TopKResult top_k_similar(std::span<const float> query, std::span<const std::string> candidate_ids,
                         const EmbeddingMatrix& matrix, std::size_t k, const IdSet& exclude) {
  TopKResult out;
  if (k == 0) return out;
  if (query.size() != matrix.dim())
    throw Error(ErrorKind::kDimensionMismatch,
                "query dim " + std::to_string(query.size()) + " vs matrix dim " + std::to_string(matrix.dim()));
  const double qn = norm(query);
  if (qn == 0.0) throw Error(ErrorKind::kZeroNormVector, "query");
  std::vector<std::size_t> rows;
  rows.reserve(candidate_ids.size());
  for (const auto& id : candidate_ids) {
    if (exclude.contains(id)) continue;
    const auto r = matrix.find(id);
    if (!r) throw Error(ErrorKind::kUnresolvedId, id);
    rows.push_back(*r);
  }
  std::vector<std::size_t> zero;
  for (const auto& s : rank_rows(query, qn, rows, matrix, k, &zero)) {
    out.ids.push_back(matrix.id(s.row));
    out.similarities.push_back(s.similarity);
  }
  for (std::size_t r : zero) out.zero_norm_skipped.push_back(matrix.id(r));
  return out;
}

void save_cluster_model(const ClusterModel& model, const Pool& pool, const std::filesystem::path& path) {
  if (model.row_count() != pool.size()) throw Error(ErrorKind::kModelPoolMismatch, path.string());
  std::vector<Json> out;
  out.push_back({{"k", model.k},
                 {"dim", model.dim},
                 {"seed", model.seed},
                 {"iterations_run", model.iterations_run},
                 {"inertia", model.inertia},
                 {"rows", model.row_count()}});
  for (std::size_t c = 0; c < model.k; ++c) {
    Json ids = Json::array();
    for (std::size_t r : model.members[c]) ids.push_back(pool.example(r).id);
    const auto cen = model.centroid(c);
    out.push_back({{"cluster", c}, {"members", std::move(ids)}, {"centroid", std::vector<double>(cen.begin(), cen.end())}});
  }
  detail::write_records(path, out);
}

ClusterModel load_cluster_model(const std::filesystem::path& path, const Pool& pool) {
  const auto records = detail::read_records(path);
  if (records.empty()) throw Error(ErrorKind::kMalformedRecord, path.string() + ": empty model file");
  ClusterModel model;
  try {
    const auto& h = records.front().value;
    model.k = h.at("k").get<std::size_t>();
    model.dim = h.at("dim").get<std::size_t>();
    model.seed = h.at("seed").get<std::uint64_t>();
    model.iterations_run = h.at("iterations_run").get<std::size_t>();
    model.inertia = h.at("inertia").get<double>();
    if (records.size() != model.k + 1)
      throw Error(ErrorKind::kMalformedRecord, path.string() + ": expected " + std::to_string(model.k) + " clusters");
    model.centroids.assign(model.k * model.dim, 0.0);
    model.members.assign(model.k, {});
    constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
    model.assignment.assign(pool.size(), kUnset);
    for (std::size_t i = 1; i < records.size(); ++i) {
      const auto& j = records[i].value;
      const auto c = j.at("cluster").get<std::size_t>();
      if (c >= model.k) throw Error(ErrorKind::kMalformedRecord, detail::where(path, records[i].line_no));
      const auto cen = j.at("centroid").get<std::vector<double>>();
      if (cen.size() != model.dim)
        throw Error(ErrorKind::kDimensionMismatch, detail::where(path, records[i].line_no));
      std::copy(cen.begin(), cen.end(), model.centroids.begin() + static_cast<std::ptrdiff_t>(c * model.dim));
      for (const auto& id : j.at("members")) {
        const auto r = pool.find(id.get<std::string>());
        if (!r || model.assignment[*r] != kUnset)
          throw Error(ErrorKind::kModelPoolMismatch, "member " + id.get<std::string>());
        model.assignment[*r] = c;
      }
    }
    for (std::size_t r = 0; r < pool.size(); ++r) {
      if (model.assignment[r] == kUnset)
        throw Error(ErrorKind::kModelPoolMismatch, "pool row " + pool.example(r).id + " not in any cluster");
      model.members[model.assignment[r]].push_back(r);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kMalformedRecord, path.string() + ": " + e.what());
  }
  annotate_cells(model, pool);
  return model;
}

}  // namespace fads
