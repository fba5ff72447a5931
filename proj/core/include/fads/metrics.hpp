#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fads/corpus.hpp"
#include "fads/demonstration_set.hpp"

namespace fads {

/// max(ratios) - min(ratios). Throws NotADistribution unless the ratios are
/// non-negative and sum to 1 within 1e-9.
double maxdiff(std::span<const double> ratios);

struct Outcome {
  int prediction = 0;
  int ground_truth = 0;
  bool correct() const noexcept { return prediction == ground_truth; }
};

/// Outcomes bucketed per (attribute, category); each evaluated query lands
/// once per attribute under its own category.
class GroupedOutcomes {
 public:
  explicit GroupedOutcomes(SensitiveAttributeSchema schema);

  /// `categories` holds one category code per schema attribute.
  void add(std::span<const std::size_t> categories, Outcome outcome);

  const SensitiveAttributeSchema& schema() const noexcept { return schema_; }
  const std::vector<Outcome>& outcomes(std::size_t attribute, std::size_t category) const {
    return buckets_[attribute][category];
  }
  std::size_t total() const noexcept { return total_; }

 private:
  SensitiveAttributeSchema schema_;
  std::vector<std::vector<std::vector<Outcome>>> buckets_;
  std::size_t total_ = 0;
};

struct SubgroupAccuracy {
  std::string category;
  std::size_t count = 0;
  double accuracy = 0.0;
};

/// Categories with at least one evaluated sample, in schema order.
std::vector<SubgroupAccuracy> subgroup_accuracies(const GroupedOutcomes& outcomes,
                                                  std::string_view attribute);

/// max - min subgroup accuracy over categories with >= 1 sample. Throws
/// InsufficientGroups when fewer than two such categories exist.
double accuracy_difference(const GroupedOutcomes& outcomes, std::string_view attribute);

struct PerformanceMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when the metric's denominator was zero and it was reported as 0.
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Binary metrics with class 1 positive. Throws EmptyInput.
PerformanceMetrics performance(std::span<const Outcome> outcomes);

/// Sample Pearson correlation. Throws LengthMismatch (also for n < 2) or ZeroVariance.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// MaxDiff over the set's category ratios for `attribute`; every schema
/// category contributes, including zero-count ones. Throws EmptySet.
double composition_maxdiff(const DemonstrationSet& set, std::string_view attribute);

// ---------------------------------------------------------------------------
// Reports

struct AttributeFairness {
  std::string attribute;
  std::vector<SubgroupAccuracy> subgroups;
  std::optional<double> ad;
  /// Mean per-set composition MaxDiff over the run's non-empty sets.
  std::optional<double> composition_maxdiff;
};

struct RunMeta {
  std::string label;
  std::string strategy;
  std::size_t shots = 0;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::size_t n_d = 0;
  std::size_t pool_size = 0;
  std::size_t queries = 0;
  std::size_t processed = 0;
  std::size_t skipped = 0;
};

struct FairnessReport {
  RunMeta meta;
  std::vector<AttributeFairness> attributes;
  std::optional<double> avg_ad;
  PerformanceMetrics overall;

  const AttributeFairness* find(std::string_view attribute) const;
};

/// Unweighted mean of the defined per-attribute ADs; nullopt when none is defined.
std::optional<double> average_ad(std::span<const AttributeFairness> attributes);

/// Decimal rendering rounded half away from zero ("half-up" on magnitudes).
std::string format_fixed(double value, int decimals);
/// fraction * 100 with two decimals.
std::string format_percent(double fraction, int decimals = 2);

}  // namespace fads
