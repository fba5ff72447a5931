#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fads/corpus.hpp"
#include "fads/demonstration_set.hpp"
#include "fads/metrics.hpp"
#include "fads/model_client.hpp"
#include "fads/selectors.hpp"

namespace fads {

struct ExperimentConfig {
  /// Method name in reports; empty = the strategy's display name.
  std::string label;
  Strategy strategy = Strategy::kFads;
  std::size_t shots = 8;
  std::size_t k = 64;
  std::size_t n_d = 0;
  std::string stratify_attribute;
  std::vector<std::string> attributes;
  std::size_t min_per_combo = 2;
  double rarity_threshold = 0.05;
  std::uint64_t seed = 0;
  ModelClientSpec client;

  std::filesystem::path schema_path;
  std::filesystem::path pool_path;
  std::optional<std::filesystem::path> pool_embeddings;
  std::filesystem::path queries_path;
  std::optional<std::filesystem::path> query_embeddings;
  std::optional<std::filesystem::path> template_path;
  std::filesystem::path output_dir;

  /// Random subsample of the pool; 0 keeps every item.
  std::size_t pool_size = 0;
  std::size_t workers = 1;
  double max_skip_rate = 0.2;
};

/// Applies zero_shot => shots = 0 and rejects a FADS-family config without
/// an attribute to balance. Throws InvalidArgument.
ExperimentConfig normalized(ExperimentConfig config);

/// Canonical JSON (sorted keys, no output dir, no secrets).
std::string config_snapshot(const ExperimentConfig& config);
/// Reads a JSON object with the snapshot's keys; absent keys keep `base` values.
/// Relative paths resolve against `relative_to`.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {},
                              const std::filesystem::path& relative_to = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

enum class QueryStatus { kProcessed, kClientFailure, kUnparseable };

struct QueryOutcome {
  DemonstrationSet set;
  std::string prompt;
  QueryStatus status = QueryStatus::kProcessed;
  std::string raw_response;
  std::optional<int> prediction;
  std::string skip_reason;
};

struct ExperimentResult {
  FairnessReport report;
  std::vector<QueryOutcome> outcomes;
};

/// Loads data, selects and assembles per query, invokes the model client and
/// folds outcomes into a report. Artifacts land in config.output_dir when set:
/// config.snapshot, prompts/<query_id>.txt, predictions.records,
/// demonstrations.records, report.csv, report.md, scatter.csv.
/// Throws SkipRateExceeded when more than max_skip_rate of queries were skipped.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Selection and prompt assembly only (no model calls, no report). Writes
/// config.snapshot, prompts/ and demonstrations.records when output_dir is set.
std::vector<QueryOutcome> run_selection(const ExperimentConfig& config);

/// Aggregates per-query outcomes into a report.
FairnessReport build_report(const ExperimentConfig& config, const QuerySet& queries, std::size_t pool_size,
                            const std::vector<QueryOutcome>& outcomes);

// ---------------------------------------------------------------------------
// Sweeps

/// Axes: shots, k, n_d, min_per_combo, rarity_threshold, pool_size, strategy,
/// seed, oracle_beta, data (a directory holding schema/pool/queries records).
struct SweepSpec {
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  std::size_t max_cells = 512;
  /// Cells that differ only along this axis are paired first-vs-last value.
  std::string pair_axis = "pool_size";
};

struct SweepCell {
  std::size_t index = 0;
  std::vector<std::pair<std::string, std::string>> values;
  ExperimentConfig config;
  std::optional<FairnessReport> report;
  std::string error;
};

struct ScatterPoint {
  std::size_t cell = 0;
  std::string label;
  std::string attribute;
  double composition_maxdiff = 0.0;
  double ad = 0.0;
};

struct ChangeRow {
  std::string group;  // other axis values, "a=1,b=2"
  std::string label;
  std::string attribute;
  std::string from, to;
  double ad_from = 0.0, ad_to = 0.0;
  double change_pp() const { return (ad_to - ad_from) * 100.0; }
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<ScatterPoint> scatter;
  std::vector<ChangeRow> changes;
  /// Over every scatter point; nullopt with < 2 points or zero variance.
  std::optional<double> pearson;
};

/// Cartesian product of the axes (last axis fastest); cell i runs under
/// <output_dir>/cells/<i>_<values>/. A failing cell is recorded and skipped.
/// Writes cells.csv, sweep.csv, scatter.csv, changes.csv and summary.md.
SweepResult run_sweep(const ExperimentConfig& base, const SweepSpec& sweep);

/// Copies one axis value onto a config. Throws InvalidArgument.
void apply_axis(ExperimentConfig& config, const std::string& axis, const std::string& value);

/// "shots=4,8,16" -> {"shots", {"4","8","16"}}. Throws InvalidArgument.
std::pair<std::string, std::vector<std::string>> parse_axis(const std::string& text);

}  // namespace fads
