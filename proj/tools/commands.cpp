#include "commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "fads/corpus.hpp"
#include "fads/error.hpp"
#include "fads/harness.hpp"
#include "fads/report.hpp"
#include "fads/synthetic.hpp"
#include "fads/vectorspace.hpp"

namespace fads::cli {

namespace {

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIoFailure, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorKind::kIoFailure, "write failed for " + path.string());
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Flags shared by select / evaluate / sweep. Values are only copied onto
/// the config when the flag was given, so they override the config file.
struct ExperimentFlags {
  std::string config, pool, pool_embeddings, queries, query_embeddings, schema, strategy, stratify, attributes,
      endpoint, model, out, template_path, label, oracle_attributes;
  std::size_t shots = 0, k = 0, n_d = 0, min_per_combo = 0, workers = 0, max_in_flight = 0, pool_size = 0,
              max_retries = 0;
  double rarity_threshold = 0, oracle_p0 = 0, oracle_beta = 0, timeout = 0, max_skip_rate = 0;
  std::uint64_t seed = 0, oracle_seed = 0;
  std::vector<CLI::Option*> options;
  CLI::Option* opt(const std::string& name) const {
    for (auto* o : options)
      if (o->check_name(name)) return o;
    return nullptr;
  }
  bool given(const std::string& name) const {
    const auto* o = opt(name);
    return o && o->count() > 0;
  }
};

void add_data_flags(CLI::App& app, ExperimentFlags& f) {
  f.options.push_back(app.add_option("--pool", f.pool, "Pool records"));
  f.options.push_back(app.add_option("--pool-embeddings", f.pool_embeddings, "Pool embedding sidecar"));
  f.options.push_back(app.add_option("--schema", f.schema, "Sensitive-attribute schema records"));
}

void add_experiment_flags(CLI::App& app, ExperimentFlags& f) {
  add_data_flags(app, f);
  auto& o = f.options;
  o.push_back(app.add_option("--config", f.config, "JSON config; flags override its values"));
  o.push_back(app.add_option("--queries", f.queries, "Query records"));
  o.push_back(app.add_option("--query-embeddings", f.query_embeddings, "Query embedding sidecar"));
  o.push_back(app.add_option("--strategy", f.strategy,
                             "zero_shot|random|similarity|kmeans|fads|fads_interaction|fads_adaptive"));
  o.push_back(app.add_option("--shots", f.shots, "Demonstrations per query"));
  o.push_back(app.add_option("--k", f.k, "Number of clusters"));
  o.push_back(app.add_option("--n-d", f.n_d, "Balanced clusters kept (0 = ceil(k/2))"));
  o.push_back(app.add_option("--stratify", f.stratify, "Attribute balanced by FADS"));
  o.push_back(app.add_option("--attributes", f.attributes, "Comma list of attributes for combination minimums"));
  o.push_back(app.add_option("--min-per-combo", f.min_per_combo, "Per-combination minimum"));
  o.push_back(app.add_option("--rarity-threshold", f.rarity_threshold, "Adaptive rarity cut-off"));
  o.push_back(app.add_option("--seed", f.seed, "Run seed"));
  o.push_back(app.add_option("--oracle-p0", f.oracle_p0, "Oracle base accuracy"));
  o.push_back(app.add_option("--oracle-beta", f.oracle_beta, "Oracle bias strength"));
  o.push_back(app.add_option("--oracle-seed", f.oracle_seed, "Oracle seed"));
  o.push_back(app.add_option("--oracle-attributes", f.oracle_attributes, "Comma list feeding the oracle bias"));
  o.push_back(app.add_option("--endpoint", f.endpoint, "Remote completion endpoint (switches off the oracle)"));
  o.push_back(app.add_option("--model", f.model, "Remote model name"));
  o.push_back(app.add_option("--timeout", f.timeout, "Remote timeout in seconds"));
  o.push_back(app.add_option("--max-retries", f.max_retries, "Remote retries after the first attempt"));
  o.push_back(app.add_option("--max-in-flight", f.max_in_flight, "Concurrent remote requests"));
  o.push_back(app.add_option("--workers", f.workers, "Query worker threads"));
  o.push_back(app.add_option("--template", f.template_path, "Prompt template file"));
  o.push_back(app.add_option("--label", f.label, "Method name in reports"));
  o.push_back(app.add_option("--pool-size", f.pool_size, "Random pool subsample size"));
  o.push_back(app.add_option("--max-skip-rate", f.max_skip_rate, "Abort threshold for skipped queries"));
  o.push_back(app.add_option("--out", f.out, "Output directory"));
}

ExperimentConfig build_config(const ExperimentFlags& f) {
  ExperimentConfig c;
  if (f.given("--config")) c = load_config(f.config);
  if (f.given("--pool")) c.pool_path = f.pool;
  if (f.given("--pool-embeddings")) c.pool_embeddings = std::filesystem::path(f.pool_embeddings);
  if (f.given("--schema")) c.schema_path = f.schema;
  if (f.given("--queries")) c.queries_path = f.queries;
  if (f.given("--query-embeddings")) c.query_embeddings = std::filesystem::path(f.query_embeddings);
  if (f.given("--strategy")) c.strategy = parse_strategy(f.strategy);
  if (f.given("--shots")) c.shots = f.shots;
  if (f.given("--k")) c.k = f.k;
  if (f.given("--n-d")) c.n_d = f.n_d;
  if (f.given("--stratify")) c.stratify_attribute = f.stratify;
  if (f.given("--attributes")) c.attributes = split_list(f.attributes);
  if (f.given("--min-per-combo")) c.min_per_combo = f.min_per_combo;
  if (f.given("--rarity-threshold")) c.rarity_threshold = f.rarity_threshold;
  if (f.given("--seed")) c.seed = f.seed;
  if (f.given("--workers")) c.workers = f.workers;
  if (f.given("--template")) c.template_path = std::filesystem::path(f.template_path);
  if (f.given("--label")) c.label = f.label;
  if (f.given("--pool-size")) c.pool_size = f.pool_size;
  if (f.given("--max-skip-rate")) c.max_skip_rate = f.max_skip_rate;
  if (f.given("--out")) c.output_dir = f.out;

  const bool remote_flags = f.given("--endpoint") || f.given("--model") || f.given("--timeout") ||
                            f.given("--max-retries") || f.given("--max-in-flight");
  const bool oracle_flags = f.given("--oracle-p0") || f.given("--oracle-beta") || f.given("--oracle-seed") ||
                            f.given("--oracle-attributes");
  if (remote_flags && oracle_flags)
    throw Error(ErrorKind::kInvalidArgument, "oracle and remote endpoint flags are mutually exclusive");
  if (f.given("--endpoint") && c.client.is_oracle()) c.client.options = RemoteClientOptions{};
  if (auto* r = std::get_if<RemoteClientOptions>(&c.client.options)) {
    if (oracle_flags) throw Error(ErrorKind::kInvalidArgument, "oracle flags given but the config selects a remote client");
    if (f.given("--endpoint")) r->endpoint = f.endpoint;
    if (f.given("--model")) r->model = f.model;
    if (f.given("--timeout")) r->timeout_seconds = f.timeout;
    if (f.given("--max-retries")) r->max_retries = f.max_retries;
    if (f.given("--max-in-flight")) r->max_in_flight = f.max_in_flight;
    if (r->endpoint.empty()) throw Error(ErrorKind::kInvalidArgument, "remote client needs --endpoint");
  } else {
    if (remote_flags) throw Error(ErrorKind::kInvalidArgument, "remote flags given without --endpoint");
    auto& o = std::get<OracleOptions>(c.client.options);
    if (f.given("--oracle-p0")) o.p0 = f.oracle_p0;
    if (f.given("--oracle-beta")) o.beta = f.oracle_beta;
    if (f.given("--oracle-seed")) o.seed = f.oracle_seed;
    if (f.given("--oracle-attributes")) o.attributes = split_list(f.oracle_attributes);
  }
  return normalized(c);
}

void require_inputs(const ExperimentConfig& c) {
  if (c.pool_path.empty() || c.queries_path.empty() || c.schema_path.empty())
    throw Error(ErrorKind::kInvalidArgument, "--pool, --queries and --schema are required");
}

std::string summary_line(const FairnessReport& r) {
  std::string s = r.meta.label + ": accuracy " + format_percent(r.overall.accuracy) + "%";
  for (const auto& a : r.attributes) s += ", " + a.attribute + " AD " + (a.ad ? format_percent(*a.ad) + "%" : "n/a");
  s += ", avg AD " + (r.avg_ad ? format_percent(*r.avg_ad) + "%" : "n/a");
  s += " (" + std::to_string(r.meta.processed) + " processed, " + std::to_string(r.meta.skipped) + " skipped)";
  return s;
}

// ---------------------------------------------------------------------------

struct ClusterArgs {
  ExperimentFlags data;
  std::size_t k = 64;
  std::uint64_t seed = 0;
  std::string out, stratify;
};

int cmd_cluster(const ClusterArgs& a, std::ostream& out) {
  if (a.data.pool.empty() || a.data.schema.empty() || a.out.empty())
    throw Error(ErrorKind::kInvalidArgument, "cluster needs --pool, --schema and --out");
  const auto schema = load_schema(a.data.schema);
  std::optional<std::filesystem::path> emb;
  if (!a.data.pool_embeddings.empty()) emb = a.data.pool_embeddings;
  const auto pool = load_pool(a.data.pool, emb, schema);
  const auto model = cluster_pool(pool, a.k, a.seed);
  const std::filesystem::path path(a.out);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  save_cluster_model(model, pool, path);

  std::vector<std::string> attrs = a.stratify.empty() ? schema.names() : std::vector<std::string>{a.stratify};
  std::string csv = "cluster,attribute,size,score\n";
  for (const auto& attr : attrs)
    for (const auto& s : cluster_balance_scores(model, attr))
      csv += std::to_string(s.cluster_index) + "," + csv_escape(attr) + "," +
             std::to_string(model.members[s.cluster_index].size()) + "," +
             (std::isinf(s.score) ? std::string("inf") : num(s.score)) + "\n";
  write_file(path.string() + ".scores.csv", csv);
  out << "clustered " << pool.size() << " items into " << model.k << " clusters in " << model.iterations_run
      << " iterations (inertia " << num(model.inertia) << ")\n";
  return kOk;
}

int cmd_select(const ExperimentFlags& f, std::ostream& out) {
  const auto c = build_config(f);
  require_inputs(c);
  if (c.output_dir.empty()) throw Error(ErrorKind::kInvalidArgument, "select needs --out");
  const auto outcomes = run_selection(c);
  std::size_t warned = 0;
  for (const auto& o : outcomes) warned += o.set.warnings.empty() ? 0 : 1;
  out << "selected demonstrations for " << outcomes.size() << " queries (" << warned << " with warnings)\n";
  return kOk;
}

int cmd_evaluate(const ExperimentFlags& f, std::ostream& out) {
  const auto c = build_config(f);
  require_inputs(c);
  const auto result = run_experiment(c);
  out << summary_line(result.report) << "\n";
  return kOk;
}

int cmd_sweep(const ExperimentFlags& f, const std::vector<std::string>& axes, const std::string& pair_axis,
              std::size_t max_cells, std::ostream& out) {
  const auto c = build_config(f);
  require_inputs(c);
  SweepSpec spec;
  for (const auto& a : axes) spec.axes.push_back(parse_axis(a));
  spec.pair_axis = pair_axis;
  spec.max_cells = max_cells;
  const auto result = run_sweep(c, spec);
  std::size_t failed = 0;
  for (const auto& cell : result.cells) failed += cell.report ? 0 : 1;
  out << result.cells.size() << " cells, " << failed << " failed";
  if (result.pearson) out << ", pearson(MaxDiff, AD) = " << format_fixed(*result.pearson, 4);
  out << "\n";
  return kOk;
}

struct SyntheticArgs {
  std::vector<std::string> attributes;
  SyntheticSpec spec;
  std::string out;
  bool sidecar = false;
};

/// "gender=Male:0.75,Female:0.25"; a category named Unknown turns on allow_unknown.
SyntheticAttribute parse_synthetic_attribute(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(ErrorKind::kInvalidArgument, "attribute must look like name=Cat:p,Cat:p (got '" + text + "')");
  SyntheticAttribute a;
  a.name = text.substr(0, eq);
  std::optional<double> unknown;
  for (const auto& item : split_list(text.substr(eq + 1))) {
    const auto colon = item.rfind(':');
    if (colon == std::string::npos || colon == 0)
      throw Error(ErrorKind::kInvalidArgument, "category entry must look like Cat:p (got '" + item + "')");
    double p = 0.0;
    try {
      p = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorKind::kBadProportions, "bad proportion in '" + item + "'");
    }
    const auto cat = item.substr(0, colon);
    if (cat == kUnknownCategory) {
      unknown = p;
    } else {
      a.categories.push_back(cat);
      a.proportions.push_back(p);
    }
  }
  // Unknown always sits after the declared categories.
  if (unknown) {
    a.allow_unknown = true;
    a.proportions.push_back(*unknown);
  }
  return a;
}

int cmd_gen_synthetic(SyntheticArgs a, std::ostream& out) {
  if (a.out.empty()) throw Error(ErrorKind::kInvalidArgument, "gen-synthetic needs --out");
  if (a.attributes.empty()) a.attributes = {"gender=Male:0.5,Female:0.5"};
  for (const auto& text : a.attributes) a.spec.attributes.push_back(parse_synthetic_attribute(text));
  const auto data = generate_synthetic(a.spec);
  write_synthetic(data, a.out, a.sidecar);
  out << "wrote " << data.pool.size() << " pool items and " << data.queries.queries.size() << " queries to "
      << a.out << "\n";
  return kOk;
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string layout = "fairness";
  std::string attribute = "race";
  std::string out, csv_out, attributes;
  int decimals = 2;
  int accuracy_decimals = 2;
  bool keep_order = false;
  bool no_bold = false;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  std::vector<FairnessReport> reports;
  for (const auto& input : a.inputs) {
    std::filesystem::path p(input);
    if (std::filesystem::is_directory(p)) p /= "report.csv";
    if (!std::filesystem::is_regular_file(p)) throw Error(ErrorKind::kMissingReport, input);
    for (auto& r : read_report_csv(p)) reports.push_back(std::move(r));
  }
  TableOptions opts;
  opts.decimals = a.decimals;
  opts.accuracy_decimals = a.accuracy_decimals;
  opts.bold_best = !a.no_bold;
  opts.sort_by_avg_ad = !a.keep_order;
  opts.attributes = split_list(a.attributes);
  std::string md;
  if (a.layout == "fairness") md = render_fairness_table(reports, opts);
  else if (a.layout == "composition") md = render_composition_table(reports, opts);
  else if (a.layout == "change") md = render_change_table(reports, a.attribute, opts);
  else throw Error(ErrorKind::kInvalidArgument, "unknown layout " + a.layout);
  if (!a.csv_out.empty()) write_report_csv(reports, a.csv_out);
  if (a.out.empty()) out << md;
  else write_file(a.out, md);
  return kOk;
}

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::kUsage: return kUsage;
    case ErrorCategory::kData: return kData;
    case ErrorCategory::kRuntime: return kRuntime;
  }
  return kRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fairness-aware demonstration selection toolkit", "fads"};
  app.require_subcommand(1);

  ClusterArgs cluster;
  auto* c_cluster = app.add_subcommand("cluster", "Cluster a pool and score cluster balance");
  add_data_flags(*c_cluster, cluster.data);
  c_cluster->add_option("--k", cluster.k, "Number of clusters");
  c_cluster->add_option("--seed", cluster.seed, "Seed");
  c_cluster->add_option("--stratify", cluster.stratify, "Score this attribute only");
  c_cluster->add_option("--out", cluster.out, "Model output path; scores go to <out>.scores.csv");

  ExperimentFlags select_flags, eval_flags, sweep_flags;
  auto* c_select = app.add_subcommand("select", "Select demonstrations and assemble prompts");
  add_experiment_flags(*c_select, select_flags);
  auto* c_eval = app.add_subcommand("evaluate", "Run selection, model calls and fairness metrics");
  add_experiment_flags(*c_eval, eval_flags);

  auto* c_sweep = app.add_subcommand("sweep", "Run a grid of experiments");
  add_experiment_flags(*c_sweep, sweep_flags);
  std::vector<std::string> axes;
  std::string pair_axis = "pool_size";
  std::size_t max_cells = 512;
  c_sweep->add_option("--axis", axes, "name=v1,v2 (repeatable)")->required();
  c_sweep->add_option("--pair-axis", pair_axis, "Axis whose first and last values are paired for AD change");
  c_sweep->add_option("--max-cells", max_cells, "Upper bound on grid size");

  SyntheticArgs synth;
  auto* c_synth = app.add_subcommand("gen-synthetic", "Generate a synthetic pool and query set");
  c_synth->add_option("--attribute", synth.attributes, "name=Cat:p,Cat:p (repeatable)");
  c_synth->add_option("--n", synth.spec.pool_size, "Pool size");
  c_synth->add_option("--queries", synth.spec.query_count, "Query count");
  c_synth->add_option("--positive-rate", synth.spec.positive_rate, "Share of label 1");
  c_synth->add_option("--dim", synth.spec.dim, "Embedding dimension");
  c_synth->add_option("--topics", synth.spec.topics, "Number of blob centers");
  c_synth->add_option("--topic-spread", synth.spec.topic_spread, "Scale of blob centers");
  c_synth->add_option("--label-separation", synth.spec.label_separation, "Scale of label offsets");
  c_synth->add_option("--leakage", synth.spec.leakage, "Weight of attribute offsets in the geometry");
  c_synth->add_option("--noise", synth.spec.noise, "Per-item noise scale");
  c_synth->add_option("--seed", synth.spec.seed, "Seed");
  c_synth->add_flag("--sidecar", synth.sidecar, "Write embeddings to .emb sidecars");
  c_synth->add_option("--out", synth.out, "Output directory");

  ReportArgs report;
  auto* c_report = app.add_subcommand("report", "Merge run reports into comparison tables");
  c_report->add_option("inputs", report.inputs, "Run directories or report.csv files")->required();
  c_report->add_option("--layout", report.layout, "fairness|composition|change");
  c_report->add_option("--attribute", report.attribute, "Attribute for the change layout");
  c_report->add_option("--attributes", report.attributes, "Comma list of attribute columns");
  c_report->add_option("--decimals", report.decimals, "Decimals for percentages");
  c_report->add_option("--accuracy-decimals", report.accuracy_decimals, "Decimals for the accuracy column");
  c_report->add_flag("--keep-order", report.keep_order, "Keep input order instead of sorting by Avg AD");
  c_report->add_flag("--no-bold", report.no_bold, "Do not bold best values");
  c_report->add_option("--out", report.out, "Write Markdown here instead of stdout");
  c_report->add_option("--csv-out", report.csv_out, "Also write the merged CSV");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (c_cluster->parsed()) return cmd_cluster(cluster, out);
    if (c_select->parsed()) return cmd_select(select_flags, out);
    if (c_eval->parsed()) return cmd_evaluate(eval_flags, out);
    if (c_sweep->parsed()) return cmd_sweep(sweep_flags, axes, pair_axis, max_cells, out);
    if (c_synth->parsed()) return cmd_gen_synthetic(synth, out);
    if (c_report->parsed()) return cmd_report(report, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace fads::cli
