#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fads/corpus.hpp"
#include "fads/embedding_matrix.hpp"

namespace fads {

using IdSet = std::set<std::string, std::less<>>;

/// (a.b) / (|a| |b|), accumulated in double. Throws ZeroNormVector or
/// DimensionMismatch.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

struct KMeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-6;
};

/// Output of k-means over a pool's embedding matrix.
struct ClusterModel {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::vector<double> centroids;              // k x dim, row-major
  std::vector<std::size_t> assignment;        // row -> cluster
  std::vector<std::vector<std::size_t>> members;  // cluster -> rows, ascending
  std::size_t iterations_run = 0;
  double inertia = 0.0;
  /// Inertia after every assignment step, in order.
  std::vector<double> inertia_history;

  /// Filled by annotate_cells: cell_counts[cluster][attribute] holds
  /// |categories|*2 counts indexed by cell_index(category, label).
  std::vector<std::string> attribute_names;
  std::vector<std::vector<std::vector<std::size_t>>> cell_counts;

  static constexpr std::size_t cell_index(std::size_t category, int label) noexcept {
    return category * 2 + static_cast<std::size_t>(label);
  }

  std::span<const double> centroid(std::size_t c) const { return {centroids.data() + c * dim, dim}; }
  std::size_t row_count() const noexcept { return assignment.size(); }
};

/// Lloyd's algorithm with k-means++ seeding from `seed`. Stops when the largest
/// centroid move drops below tol or after max_iter assignment rounds. A
/// cluster left empty is re-seeded at the point farthest from its centroid.
ClusterModel kmeans(const EmbeddingMatrix& matrix, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// Tallies per-cluster (attribute, category, label) cells. Throws
/// ModelPoolMismatch when the model was not built over `pool`.
void annotate_cells(ClusterModel& model, const Pool& pool);

/// kmeans over the pool's embeddings followed by annotate_cells.
ClusterModel cluster_pool(const Pool& pool, std::size_t k, std::uint64_t seed,
                          const KMeansOptions& options = {});

struct ClusterBalanceScore {
  std::size_t cluster_index = 0;
  double score = 0.0;
  std::string stratify_attribute;
};

/// (1/|C|) * sum over (category, label) cells of | count - |C| / n_cells |,
/// with n_cells = |categories| * 2. `cells` must hold n_cells counts.
double balance_score(std::span<const std::size_t> cells);

/// Scores one cluster given as a list of pool rows. Throws EmptyCluster.
ClusterBalanceScore balance_score(const Pool& pool, std::span<const std::size_t> members,
                                  std::string_view attribute, std::size_t cluster_index = 0);

/// One score per cluster from the annotated cell counts. Empty clusters score +inf.
std::vector<ClusterBalanceScore> cluster_balance_scores(const ClusterModel& model,
                                                        std::string_view attribute);

/// The n_d lowest-scoring clusters, ties by ascending index.
std::vector<std::size_t> select_balanced_clusters(const ClusterModel& model,
                                                  std::string_view attribute, std::size_t n_d);

/// Default number of balanced clusters kept by the filter: ceil(k / 2).
constexpr std::size_t default_n_d(std::size_t k) noexcept { return (k + 1) / 2; }

struct ScoredRow {
  std::size_t row;
  double similarity;
};

struct TopKResult {
  std::vector<std::string> ids;
  std::vector<double> similarities;
  /// Candidates dropped because their vector has zero norm.
  std::vector<std::string> zero_norm_skipped;
};

/// Candidates sorted by descending cosine similarity to the query, ties by
/// ascending id; excluded ids never returned. Returns fewer than k when the
/// candidates run out. Throws ZeroNormVector only for the query itself.
TopKResult top_k_similar(std::span<const float> query, std::span<const std::string> candidate_ids,
                         const EmbeddingMatrix& matrix, std::size_t k, const IdSet& exclude = {});

/// Row-level ranking used by the selectors. `query_norm` must be nonzero.
/// Zero-norm rows are appended to `zero_norm` (when given) and skipped.
std::vector<ScoredRow> rank_rows(std::span<const float> query, double query_norm,
                                 std::span<const std::size_t> rows, const EmbeddingMatrix& matrix,
                                 std::size_t k = std::numeric_limits<std::size_t>::max(),
                                 std::vector<std::size_t>* zero_norm = nullptr);

/// Record file: a header line (k, dim, seed, iterations_run, inertia) then one
/// line per cluster {cluster, members: [ids], centroid: [...]}.
void save_cluster_model(const ClusterModel& model, const Pool& pool, const std::filesystem::path& path);
/// Rebinds member ids to pool rows and re-annotates cells.
ClusterModel load_cluster_model(const std::filesystem::path& path, const Pool& pool);

}  // namespace fads
