#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fads/corpus.hpp"
#include "fads/demonstration_set.hpp"
#include "fads/vectorspace.hpp"

namespace fads {

enum class Strategy { kZeroShot, kRandom, kSimilarity, kKMeans, kFads, kFadsInteraction, kFadsAdaptive };

std::string_view to_string(Strategy s) noexcept;
/// Accepts the snake_case names used on the command line. Throws InvalidArgument.
Strategy parse_strategy(std::string_view name);
/// Human-readable table label ("Zero-shot", "K-means", "FADS", ...).
std::string display_name(Strategy s);
bool needs_cluster_model(Strategy s) noexcept;
bool is_fads_family(Strategy s) noexcept;

enum class WithinCell { kSimilarity, kSampled };

struct SelectionRequest {
  std::string query_id;
  std::span<const float> query_embedding;
  std::size_t shots = 8;
  std::uint64_t seed = 0;
  /// FADS family: the attribute whose (category, label) cells are balanced.
  std::string stratify_attribute;
  /// Interaction/adaptive: attributes whose combinations get minimums
  /// (empty = every schema attribute).
  std::vector<std::string> attributes;
  IdSet exclude_ids;

  /// Balanced clusters kept by the filter; 0 selects ceil(k / 2).
  std::size_t n_d = 0;
  std::size_t min_per_combo = 2;
  double rarity_threshold = 0.05;
  WithinCell within_cell = WithinCell::kSimilarity;
  /// Seeded shuffle of the final order (ablation switch).
  bool shuffle_order = false;
};

inline constexpr std::size_t kStandardShots[] = {0, 4, 8, 16};

DemonstrationSet select_zero_shot(const Pool& pool, const SelectionRequest& req);
DemonstrationSet select_random(const Pool& pool, const SelectionRequest& req);
DemonstrationSet select_similarity(const Pool& pool, const SelectionRequest& req);
DemonstrationSet select_kmeans_baseline(const Pool& pool, const ClusterModel& model,
                                        const SelectionRequest& req);
DemonstrationSet select_fads(const Pool& pool, const ClusterModel& model, const SelectionRequest& req);
DemonstrationSet select_fads_interaction(const Pool& pool, const ClusterModel& model,
                                         const SelectionRequest& req);
/// Interaction with the minimum dropped to 1 for combinations whose pool
/// frequency is strictly below req.rarity_threshold.
DemonstrationSet select_fads_adaptive(const Pool& pool, const ClusterModel& model,
                                      const SelectionRequest& req);

/// Recomputes composition, label ratio and per-attribute MaxDiff from the ids.
void describe_composition(const Pool& pool, DemonstrationSet& set);

/// Common interface over all strategies, bound to a read-shared pool and
/// (where needed) cluster model.
class Selector {
 public:
  virtual ~Selector() = default;
  virtual Strategy strategy() const noexcept = 0;
  virtual DemonstrationSet select(const SelectionRequest& req) const = 0;
};

/// `model` may be null for strategies that do not cluster.
std::unique_ptr<Selector> make_selector(Strategy strategy, const Pool& pool,
                                        std::shared_ptr<const ClusterModel> model);

// ---------------------------------------------------------------------------
// Prompt assembly

struct PromptTemplate {
  std::string header;
  std::string demonstration = "{payload}\nAnswer: {answer}";
  std::string query = "{query}\nAnswer:";
  std::string separator = "\n\n";
  std::string positive = "yes";
  std::string negative = "no";
};

/// Text file: demonstration block, a line "---", query block. An optional
/// leading header section adds one more "---" separated block in front.
PromptTemplate load_prompt_template(const std::filesystem::path& path);

std::string assemble(const Pool& pool, const DemonstrationSet& set, const QueryExample& query,
                     const PromptTemplate& tmpl = {});

}  // namespace fads
