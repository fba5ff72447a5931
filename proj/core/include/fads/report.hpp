#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fads/metrics.hpp"

namespace fads {

/// One row per (run, attribute); numbers at full precision, fractions not percents.
std::string report_csv(std::span<const FairnessReport> reports);
void write_report_csv(std::span<const FairnessReport> reports, const std::filesystem::path& path);
/// Inverse of report_csv; rows sharing run metadata fold into one report.
std::vector<FairnessReport> parse_report_csv(const std::string& text);
std::vector<FairnessReport> read_report_csv(const std::filesystem::path& path);

struct TableOptions {
  int decimals = 2;
  /// Accuracy column precision (the fairness layout's first numeric column).
  int accuracy_decimals = 2;
  bool bold_best = true;
  /// Fairness layout only: order rows by Avg AD ascending.
  bool sort_by_avg_ad = true;
  /// Attribute columns; empty = union over reports in first-seen order.
  std::vector<std::string> attributes;
};

/// | Method | Accuracy (%) | <Attr> AD (%) ... | Avg AD (%) |
std::string render_fairness_table(std::span<const FairnessReport> reports, const TableOptions& options = {});

/// | Method | <Attr> ... | with composition MaxDiff in percent.
std::string render_composition_table(std::span<const FairnessReport> reports,
                                     const TableOptions& options = {});

/// Paired-cell AD change: | Method | <A> <Attr> AD (%) | <B> <Attr> AD (%) | Change (pp) |.
/// Pairs are formed per label across the two pool sizes present (smallest to largest).
std::string render_change_table(std::span<const FairnessReport> reports, const std::string& attribute,
                                const TableOptions& options = {});

/// "2.5K", "5K", "700".
std::string pool_size_label(std::size_t n);

std::string csv_escape(const std::string& field);
std::vector<std::string> csv_split(const std::string& line);

}  // namespace fads
