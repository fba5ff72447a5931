#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace fads {

/// Per-cell (or per-combination) bookkeeping emitted by the FADS family.
struct GroupPick {
  std::string group;  // e.g. "Female|1" for a cell, "Female|White" for a combination
  std::size_t quota = 0;
  std::size_t available = 0;
  std::vector<std::string> picked;  // most similar first
};

struct Borrow {
  std::string for_group;
  std::string id;
  std::string source;  // "opposite_label", "filtered_pool", "full_pool"
};

/// Ordered exemplar ids chosen for one query plus composition diagnostics.
struct DemonstrationSet {
  std::string query_id;
  std::string strategy_name;
  std::vector<std::string> demonstrations;

  /// attribute -> (category, ratio) in schema category order, zero-count
  /// categories included.
  std::map<std::string, std::vector<std::pair<std::string, double>>> composition;
  double label_ratio = 0.0;
  std::map<std::string, double> maxdiff_per_attribute;

  std::vector<std::string> warnings;
  std::vector<GroupPick> groups;
  std::vector<Borrow> borrows;
  std::vector<std::string> zero_norm_skipped;
  std::size_t guaranteed_slots = 0;

  std::size_t size() const noexcept { return demonstrations.size(); }
  bool has_warning(const std::string& prefix) const {
    for (const auto& w : warnings)
      if (w.rfind(prefix, 0) == 0) return true;
    return false;
  }
};

}  // namespace fads
