#include "fads/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "fads/error.hpp"

namespace fads {

double maxdiff(std::span<const double> ratios) {
  if (ratios.empty()) throw Error(ErrorKind::kNotADistribution, "no ratios");
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw Error(ErrorKind::kNotADistribution, "negative or NaN ratio");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorKind::kNotADistribution, "ratios sum to " + std::to_string(sum));
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  return *hi - *lo;
}

GroupedOutcomes::GroupedOutcomes(SensitiveAttributeSchema schema) : schema_(std::move(schema)) {
  buckets_.resize(schema_.size());
  for (std::size_t a = 0; a < schema_.size(); ++a) buckets_[a].resize(schema_.category_count(a));
}

void GroupedOutcomes::add(std::span<const std::size_t> categories, Outcome outcome) {
  if (categories.size() != schema_.size())
    throw Error(ErrorKind::kLengthMismatch, "expected " + std::to_string(schema_.size()) + " attribute codes");
  for (std::size_t a = 0; a < schema_.size(); ++a) {
    if (categories[a] >= schema_.category_count(a))
      throw Error(ErrorKind::kUnknownCategory, "attribute " + schema_.name(a));
    buckets_[a][categories[a]].push_back(outcome);
  }
  ++total_;
}

std::vector<SubgroupAccuracy> subgroup_accuracies(const GroupedOutcomes& outcomes,
                                                  std::string_view attribute) {
  const std::size_t a = outcomes.schema().index_of(attribute);
  std::vector<SubgroupAccuracy> out;
  for (std::size_t c = 0; c < outcomes.schema().category_count(a); ++c) {
    const auto& bucket = outcomes.outcomes(a, c);
    if (bucket.empty()) continue;
    const auto hits = std::count_if(bucket.begin(), bucket.end(), [](const Outcome& o) { return o.correct(); });
    out.push_back({outcomes.schema().categories(a)[c], bucket.size(),
                   static_cast<double>(hits) / static_cast<double>(bucket.size())});
  }
  return out;
}

double accuracy_difference(const GroupedOutcomes& outcomes, std::string_view attribute) {
  const auto groups = subgroup_accuracies(outcomes, attribute);
  if (groups.size() < 2) throw Error(ErrorKind::kInsufficientGroups, std::string(attribute));
  const auto [lo, hi] = std::minmax_element(groups.begin(), groups.end(), [](const auto& x, const auto& y) {
    return x.accuracy < y.accuracy;
  });
  return hi->accuracy - lo->accuracy;
}

PerformanceMetrics performance(std::span<const Outcome> outcomes) {
  if (outcomes.empty()) throw Error(ErrorKind::kEmptyInput, "performance of no predictions");
  PerformanceMetrics m;
  for (const auto& o : outcomes) {
    if (o.prediction == 1 && o.ground_truth == 1) ++m.tp;
    else if (o.prediction == 1) ++m.fp;
    else if (o.ground_truth == 1) ++m.fn;
    else ++m.tn;
  }
  const auto n = static_cast<double>(outcomes.size());
  m.accuracy = static_cast<double>(m.tp + m.tn) / n;
  if (m.tp + m.fp == 0) m.precision_degenerate = true;
  else m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  if (m.tp + m.fn == 0) m.recall_degenerate = true;
  else m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  if (m.precision + m.recall == 0.0) m.f1_degenerate = true;
  else m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw Error(ErrorKind::kLengthMismatch,
                std::to_string(xs.size()) + " vs " + std::to_string(ys.size()) + " (need >= 2 pairs)");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::kZeroVariance, "pearson of a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double composition_maxdiff(const DemonstrationSet& set, std::string_view attribute) {
  if (set.demonstrations.empty()) throw Error(ErrorKind::kEmptySet, set.query_id);
  const auto it = set.composition.find(std::string(attribute));
  if (it == set.composition.end()) throw Error(ErrorKind::kUnknownAttribute, std::string(attribute));
  std::vector<double> ratios;
  for (const auto& [category, ratio] : it->second) ratios.push_back(ratio);
  return maxdiff(ratios);
}

const AttributeFairness* FairnessReport::find(std::string_view attribute) const {
  for (const auto& a : attributes)
    if (a.attribute == attribute) return &a;
  return nullptr;
}

std::optional<double> average_ad(std::span<const AttributeFairness> attributes) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& a : attributes) {
    if (!a.ad) continue;
    sum += *a.ad;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::string format_fixed(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double magnitude = std::floor(std::abs(value) * scale + 0.5 + 1e-9);
  const bool negative = value < 0.0 && magnitude != 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%.*f", negative ? "-" : "", decimals, magnitude / scale);
  return buf;
}

std::string format_percent(double fraction, int decimals) { return format_fixed(fraction * 100.0, decimals); }

}  // namespace fads
