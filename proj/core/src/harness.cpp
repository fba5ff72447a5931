#include "fads/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "fads/error.hpp"
#include "fads/random.hpp"
#include "fads/report.hpp"
#include "fads/vectorspace.hpp"
#include "records.hpp"

namespace fads {

using detail::Json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string status_name(QueryStatus s) {
  switch (s) {
    case QueryStatus::kProcessed: return "processed";
    case QueryStatus::kClientFailure: return "client_failure";
    case QueryStatus::kUnparseable: return "unparseable";
  }
  return "processed";
}

std::string effective_label(const ExperimentConfig& c) {
  return c.label.empty() ? display_name(c.strategy) : c.label;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

std::string path_string(const std::filesystem::path& p) { return p.generic_string(); }

Json set_to_json(const QueryOutcome& o) {
  const auto& s = o.set;
  Json j;
  j["query_id"] = s.query_id;
  j["strategy"] = s.strategy_name;
  j["status"] = status_name(o.status);
  if (!o.skip_reason.empty()) j["skip_reason"] = o.skip_reason;
  j["demonstrations"] = s.demonstrations;
  Json comp = Json::object();
  for (const auto& [attr, ratios] : s.composition) {
    Json r = Json::object();
    for (const auto& [cat, ratio] : ratios) r[cat] = ratio;
    comp[attr] = r;
  }
  j["composition"] = comp;
  j["label_ratio"] = s.label_ratio;
  j["maxdiff"] = s.maxdiff_per_attribute;
  j["warnings"] = s.warnings;
  Json groups = Json::array();
  for (const auto& g : s.groups)
    groups.push_back({{"group", g.group}, {"quota", g.quota}, {"available", g.available}, {"picked", g.picked}});
  j["groups"] = groups;
  Json borrows = Json::array();
  for (const auto& b : s.borrows) borrows.push_back({{"for_group", b.for_group}, {"id", b.id}, {"source", b.source}});
  j["borrows"] = borrows;
  j["guaranteed_slots"] = s.guaranteed_slots;
  j["zero_norm_skipped"] = s.zero_norm_skipped;
  return j;
}

struct Prepared {
  ExperimentConfig config;
  SensitiveAttributeSchema schema;
  std::optional<Pool> pool;
  std::optional<QuerySet> queries;
  std::shared_ptr<const ClusterModel> model;
  std::unique_ptr<Selector> selector;
  PromptTemplate tmpl;
};

Prepared prepare(const ExperimentConfig& raw) {
  Prepared p;
  p.config = normalized(raw);
  const auto& c = p.config;
  p.schema = load_schema(c.schema_path);
  Pool full = load_pool(c.pool_path, c.pool_embeddings, p.schema);
  if (c.pool_size > 0 && c.pool_size != full.size()) {
    if (c.pool_size > full.size())
      throw Error(ErrorKind::kPoolTooSmall, "pool_size " + std::to_string(c.pool_size) + " exceeds pool of " +
                                                std::to_string(full.size()));
    Rng rng(stream_seed(c.seed, "pool_subsample"));
    auto rows = sample_without_replacement(rng, full.size(), c.pool_size);
    std::sort(rows.begin(), rows.end());
    p.pool.emplace(full.subset(rows));
  } else {
    p.pool.emplace(std::move(full));
  }
  p.queries.emplace(load_queries(c.queries_path, c.query_embeddings, p.schema));
  if (needs_cluster_model(c.strategy))
    p.model = std::make_shared<const ClusterModel>(cluster_pool(*p.pool, c.k, c.seed));
  p.selector = make_selector(c.strategy, *p.pool, p.model);
  if (c.template_path) p.tmpl = load_prompt_template(*c.template_path);
  return p;
}

SelectionRequest request_for(const ExperimentConfig& c, const QuerySet& queries, std::size_t q) {
  SelectionRequest req;
  req.query_id = queries.queries[q].id;
  req.query_embedding = queries.embedding(q);
  req.shots = c.shots;
  req.seed = c.seed;
  req.stratify_attribute = c.stratify_attribute;
  req.attributes = c.attributes;
  req.n_d = c.n_d;
  req.min_per_combo = c.min_per_combo;
  req.rarity_threshold = c.rarity_threshold;
  return req;
}

/// Runs fn(q) for every query on up to `workers` threads. The first failure
/// in query order is rethrown after all threads finish.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t q; (q = next.fetch_add(1)) < n;) {
      try {
        fn(q);
      } catch (...) {
        errors[q] = std::current_exception();
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, n));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void write_selection_artifacts(const Prepared& p, const std::vector<QueryOutcome>& outcomes) {
  const auto& dir = p.config.output_dir;
  ensure_dir(dir / "prompts");
  detail::write_text(dir / "config.snapshot", config_snapshot(p.config));
  std::vector<Json> records;
  for (const auto& o : outcomes) {
    detail::write_text(dir / "prompts" / (o.set.query_id + ".txt"), o.prompt);
    records.push_back(set_to_json(o));
  }
  detail::write_records(dir / "demonstrations.records", records);
}

std::vector<QueryOutcome> select_all(const Prepared& p) {
  const auto& queries = *p.queries;
  std::vector<QueryOutcome> outcomes(queries.queries.size());
  parallel_for(outcomes.size(), p.config.workers, [&](std::size_t q) {
    auto& o = outcomes[q];
    o.set = p.selector->select(request_for(p.config, queries, q));
    o.prompt = assemble(*p.pool, o.set, queries.queries[q], p.tmpl);
  });
  return outcomes;
}

std::string scatter_csv(const std::vector<FairnessReport>& reports) {
  std::string out = "label,strategy,shots,pool_size,attribute,composition_maxdiff,ad\n";
  for (const auto& r : reports)
    for (const auto& a : r.attributes) {
      if (!a.ad || !a.composition_maxdiff) continue;
      out += csv_escape(r.meta.label) + "," + r.meta.strategy + "," + std::to_string(r.meta.shots) + "," +
             std::to_string(r.meta.pool_size) + "," + csv_escape(a.attribute) + "," + num(*a.composition_maxdiff) +
             "," + num(*a.ad) + "\n";
    }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig normalized(ExperimentConfig c) {
  if (c.strategy == Strategy::kZeroShot) c.shots = 0;
  if (is_fads_family(c.strategy) && c.stratify_attribute.empty() &&
      (c.strategy == Strategy::kFads || c.attributes.empty()))
    throw Error(ErrorKind::kInvalidArgument, std::string(to_string(c.strategy)) + " needs a stratify attribute");
  if (c.workers == 0) throw Error(ErrorKind::kInvalidArgument, "workers must be >= 1");
  if (!(c.max_skip_rate >= 0.0 && c.max_skip_rate <= 1.0))
    throw Error(ErrorKind::kInvalidArgument, "max_skip_rate must lie in [0, 1]");
  return c;
}

std::string config_snapshot(const ExperimentConfig& c) {
  Json j;
  j["label"] = effective_label(c);
  j["strategy"] = std::string(to_string(c.strategy));
  j["shots"] = c.shots;
  j["k"] = c.k;
  j["n_d"] = c.n_d;
  j["stratify"] = c.stratify_attribute;
  j["attributes"] = c.attributes;
  j["min_per_combo"] = c.min_per_combo;
  j["rarity_threshold"] = c.rarity_threshold;
  j["seed"] = c.seed;
  Json client;
  if (const auto* o = std::get_if<OracleOptions>(&c.client.options)) {
    client = {{"kind", "synthetic_oracle"}, {"p0", o->p0}, {"beta", o->beta}, {"seed", o->seed},
              {"attributes", o->attributes}};
  } else {
    const auto& r = std::get<RemoteClientOptions>(c.client.options);
    client = {{"kind", "remote_http"},
              {"endpoint", r.endpoint},
              {"model", r.model},
              {"timeout_seconds", r.timeout_seconds},
              {"max_retries", r.max_retries},
              {"backoff_ms", r.backoff_base.count()},
              {"max_tokens", r.max_tokens},
              {"max_in_flight", r.max_in_flight}};
  }
  j["client"] = client;
  j["schema"] = path_string(c.schema_path);
  j["pool"] = path_string(c.pool_path);
  j["pool_embeddings"] = c.pool_embeddings ? Json(path_string(*c.pool_embeddings)) : Json(nullptr);
  j["queries"] = path_string(c.queries_path);
  j["query_embeddings"] = c.query_embeddings ? Json(path_string(*c.query_embeddings)) : Json(nullptr);
  j["template"] = c.template_path ? Json(path_string(*c.template_path)) : Json(nullptr);
  j["pool_size"] = c.pool_size;
  j["workers"] = c.workers;
  j["max_skip_rate"] = c.max_skip_rate;
  return j.dump(2) + "\n";
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig c, const std::filesystem::path& relative_to) {
  const Json j = Json::parse(text, nullptr, false);
  if (!j.is_object()) throw Error(ErrorKind::kMalformedRecord, "config is not a JSON object");
  const auto resolve = [&](const std::string& s) {
    std::filesystem::path p(s);
    return (p.is_relative() && !relative_to.empty()) ? relative_to / p : p;
  };
  try {
    if (j.contains("label")) c.label = j["label"].get<std::string>();
    if (j.contains("strategy")) c.strategy = parse_strategy(j["strategy"].get<std::string>());
    if (j.contains("shots")) c.shots = j["shots"].get<std::size_t>();
    if (j.contains("k")) c.k = j["k"].get<std::size_t>();
    if (j.contains("n_d")) c.n_d = j["n_d"].get<std::size_t>();
    if (j.contains("stratify")) c.stratify_attribute = j["stratify"].get<std::string>();
    if (j.contains("attributes")) c.attributes = j["attributes"].get<std::vector<std::string>>();
    if (j.contains("min_per_combo")) c.min_per_combo = j["min_per_combo"].get<std::size_t>();
    if (j.contains("rarity_threshold")) c.rarity_threshold = j["rarity_threshold"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("client")) {
      const auto& cl = j["client"];
      const auto kind = cl.value("kind", std::string("synthetic_oracle"));
      if (kind == "synthetic_oracle") {
        OracleOptions o = c.client.is_oracle() ? std::get<OracleOptions>(c.client.options) : OracleOptions{};
        o.p0 = cl.value("p0", o.p0);
        o.beta = cl.value("beta", o.beta);
        o.seed = cl.value("seed", o.seed);
        o.attributes = cl.value("attributes", o.attributes);
        c.client.options = o;
      } else if (kind == "remote_http") {
        RemoteClientOptions r =
            c.client.is_oracle() ? RemoteClientOptions{} : std::get<RemoteClientOptions>(c.client.options);
        r.endpoint = cl.value("endpoint", r.endpoint);
        r.model = cl.value("model", r.model);
        r.timeout_seconds = cl.value("timeout_seconds", r.timeout_seconds);
        r.max_retries = cl.value("max_retries", r.max_retries);
        r.backoff_base = std::chrono::milliseconds(cl.value("backoff_ms", r.backoff_base.count()));
        r.max_tokens = cl.value("max_tokens", r.max_tokens);
        r.max_in_flight = cl.value("max_in_flight", r.max_in_flight);
        c.client.options = r;
      } else {
        throw Error(ErrorKind::kInvalidArgument, "unknown client kind " + kind);
      }
    }
    const auto opt_path = [&](const char* key, std::optional<std::filesystem::path>& out) {
      if (!j.contains(key)) return;
      if (j[key].is_null()) out.reset();
      else out = resolve(j[key].get<std::string>());
    };
    if (j.contains("schema")) c.schema_path = resolve(j["schema"].get<std::string>());
    if (j.contains("pool")) c.pool_path = resolve(j["pool"].get<std::string>());
    if (j.contains("queries")) c.queries_path = resolve(j["queries"].get<std::string>());
    opt_path("pool_embeddings", c.pool_embeddings);
    opt_path("query_embeddings", c.query_embeddings);
    opt_path("template", c.template_path);
    if (j.contains("out")) c.output_dir = resolve(j["out"].get<std::string>());
    if (j.contains("pool_size")) c.pool_size = j["pool_size"].get<std::size_t>();
    if (j.contains("workers")) c.workers = j["workers"].get<std::size_t>();
    if (j.contains("max_skip_rate")) c.max_skip_rate = j["max_skip_rate"].get<double>();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kMalformedRecord, std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  return parse_config(detail::read_text(path), std::move(base), path.parent_path());
}

// ---------------------------------------------------------------------------
// Runs

FairnessReport build_report(const ExperimentConfig& c, const QuerySet& queries, std::size_t pool_size,
                            const std::vector<QueryOutcome>& outcomes) {
  FairnessReport r;
  r.meta.label = effective_label(c);
  r.meta.strategy = std::string(to_string(c.strategy));
  r.meta.shots = c.shots;
  r.meta.seed = c.seed;
  r.meta.k = needs_cluster_model(c.strategy) ? c.k : 0;
  r.meta.n_d = is_fads_family(c.strategy) ? (c.n_d ? c.n_d : default_n_d(c.k)) : 0;
  r.meta.pool_size = pool_size;
  r.meta.queries = queries.queries.size();

  GroupedOutcomes grouped(queries.schema);
  std::vector<Outcome> all;
  for (std::size_t q = 0; q < outcomes.size(); ++q) {
    const auto& o = outcomes[q];
    if (o.status != QueryStatus::kProcessed) {
      ++r.meta.skipped;
      continue;
    }
    ++r.meta.processed;
    const auto& query = queries.queries[q];
    const Outcome out{*o.prediction, *query.ground_truth};
    grouped.add(*query.attributes, out);
    all.push_back(out);
  }
  if (!all.empty()) r.overall = performance(all);

  for (std::size_t a = 0; a < queries.schema.size(); ++a) {
    AttributeFairness f;
    f.attribute = queries.schema.name(a);
    f.subgroups = subgroup_accuracies(grouped, f.attribute);
    if (f.subgroups.size() >= 2) f.ad = accuracy_difference(grouped, f.attribute);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& o : outcomes) {
      if (o.set.demonstrations.empty()) continue;
      sum += composition_maxdiff(o.set, f.attribute);
      ++n;
    }
    if (n > 0) f.composition_maxdiff = sum / static_cast<double>(n);
    r.attributes.push_back(std::move(f));
  }
  r.avg_ad = average_ad(r.attributes);
  return r;
}

std::vector<QueryOutcome> run_selection(const ExperimentConfig& config) {
  const auto p = prepare(config);
  auto outcomes = select_all(p);
  if (!p.config.output_dir.empty()) write_selection_artifacts(p, outcomes);
  return outcomes;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto p = prepare(config);
  const auto& queries = *p.queries;
  if (queries.queries.empty()) throw Error(ErrorKind::kEmptyInput, "query set is empty");
  for (const auto& q : queries.queries) {
    if (!q.ground_truth) throw Error(ErrorKind::kMissingGroundTruth, q.id);
    if (!q.attributes) throw Error(ErrorKind::kMissingAttribute, "query " + q.id + " has no attributes");
  }
  const auto client = make_client(p.config.client, p.schema);

  std::vector<QueryOutcome> outcomes(queries.queries.size());
  parallel_for(outcomes.size(), p.config.workers, [&](std::size_t q) {
    auto& o = outcomes[q];
    const auto& query = queries.queries[q];
    o.set = p.selector->select(request_for(p.config, queries, q));
    o.prompt = assemble(*p.pool, o.set, query, p.tmpl);
    try {
      o.raw_response = client->complete({*p.pool, query, o.set, o.prompt});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kClientFailure) throw;
      o.status = QueryStatus::kClientFailure;
      o.skip_reason = e.what();
      return;
    }
    o.prediction = parse_answer(o.raw_response);
    if (!o.prediction) {
      o.status = QueryStatus::kUnparseable;
      o.skip_reason = "unparseable response";
    }
  });

  ExperimentResult result;
  result.report = build_report(p.config, queries, p.pool->size(), outcomes);
  const auto& meta = result.report.meta;

  if (!p.config.output_dir.empty()) {
    write_selection_artifacts(p, outcomes);
    std::vector<PredictionRecord> predictions;
    for (const auto& o : outcomes)
      if (o.status == QueryStatus::kProcessed) predictions.push_back({o.set.query_id, *o.prediction, o.raw_response});
    save_predictions(predictions, p.config.output_dir / "predictions.records");
  }
  if (static_cast<double>(meta.skipped) > p.config.max_skip_rate * static_cast<double>(meta.queries))
    throw Error(ErrorKind::kSkipRateExceeded, std::to_string(meta.skipped) + " of " + std::to_string(meta.queries) +
                                                  " queries skipped");

  if (!p.config.output_dir.empty()) {
    const auto& dir = p.config.output_dir;
    const std::vector<FairnessReport> one{result.report};
    write_report_csv(one, dir / "report.csv");
    TableOptions opts;
    opts.bold_best = false;
    std::string md = render_fairness_table(one, opts);
    md += "\nComposition MaxDiff (%)\n\n" + render_composition_table(one, opts);
    char line[160];
    std::snprintf(line, sizeof line, "\nQueries: %zu, processed: %zu, skipped: %zu\n", meta.queries, meta.processed,
                  meta.skipped);
    md += line;
    detail::write_text(dir / "report.md", md);
    detail::write_text(dir / "scatter.csv", scatter_csv(one));
  }
  result.outcomes = std::move(outcomes);
  return result;
}

// ---------------------------------------------------------------------------
// Sweeps

std::pair<std::string, std::vector<std::string>> parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size())
    throw Error(ErrorKind::kInvalidArgument, "axis must look like name=v1,v2 (got '" + text + "')");
  std::vector<std::string> values;
  std::stringstream ss(text.substr(eq + 1));
  std::string v;
  while (std::getline(ss, v, ','))
    if (!v.empty()) values.push_back(v);
  if (values.empty()) throw Error(ErrorKind::kInvalidArgument, "axis " + text.substr(0, eq) + " has no values");
  return {text.substr(0, eq), values};
}

void apply_axis(ExperimentConfig& c, const std::string& axis, const std::string& value) {
  const auto count = [&]() -> std::size_t {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(value, &pos);
      if (pos != value.size() || value.front() == '-') throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorKind::kInvalidArgument, "axis " + axis + " expects a count, got '" + value + "'");
    }
  };
  const auto real = [&]() -> double {
    try {
      std::size_t pos = 0;
      const double v = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorKind::kInvalidArgument, "axis " + axis + " expects a number, got '" + value + "'");
    }
  };
  if (axis == "shots") c.shots = count();
  else if (axis == "k") c.k = count();
  else if (axis == "n_d") c.n_d = count();
  else if (axis == "min_per_combo") c.min_per_combo = count();
  else if (axis == "rarity_threshold") c.rarity_threshold = real();
  else if (axis == "pool_size") c.pool_size = count();
  else if (axis == "seed") c.seed = count();
  else if (axis == "strategy") c.strategy = parse_strategy(value);
  else if (axis == "oracle_beta") {
    auto* o = std::get_if<OracleOptions>(&c.client.options);
    if (!o) throw Error(ErrorKind::kInvalidArgument, "oracle_beta axis needs the synthetic oracle");
    o->beta = real();
  } else if (axis == "data") {
    const std::filesystem::path dir(value);
    c.schema_path = dir / "schema.records";
    c.pool_path = dir / "pool.records";
    c.queries_path = dir / "queries.records";
    c.pool_embeddings.reset();
    c.query_embeddings.reset();
    if (std::filesystem::exists(dir / "pool.emb")) c.pool_embeddings = dir / "pool.emb";
    if (std::filesystem::exists(dir / "queries.emb")) c.query_embeddings = dir / "queries.emb";
  } else {
    throw Error(ErrorKind::kInvalidArgument, "unknown sweep axis " + axis);
  }
}

namespace {

std::string axis_text(const std::string& axis, const std::string& value) {
  return axis == "data" ? std::filesystem::path(value).filename().string() : value;
}

std::string describe(const std::vector<std::pair<std::string, std::string>>& values, const std::string& skip = {}) {
  std::string out;
  for (const auto& [axis, value] : values) {
    if (axis == skip) continue;
    if (!out.empty()) out += ',';
    out += axis + "=" + axis_text(axis, value);
  }
  return out;
}

std::string dir_name(std::size_t index, const std::vector<std::pair<std::string, std::string>>& values) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03zu", index);
  std::string out = buf;
  for (const auto& [axis, value] : values) {
    out += '_';
    for (char ch : axis + "-" + axis_text(axis, value)) {
      const auto c = static_cast<unsigned char>(ch);
      out += (std::isalnum(c) || ch == '.' || ch == '-' || ch == '_') ? ch : '-';
    }
  }
  return out.substr(0, 120);
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& base, const SweepSpec& sweep) {
  std::size_t total = 1;
  std::set<std::string> seen;
  for (const auto& [axis, values] : sweep.axes) {
    if (values.empty()) throw Error(ErrorKind::kInvalidArgument, "axis " + axis + " has no values");
    if (!seen.insert(axis).second) throw Error(ErrorKind::kInvalidArgument, "axis " + axis + " given twice");
    ExperimentConfig probe = base;
    for (const auto& v : values) apply_axis(probe, axis, v);
    total *= values.size();
    if (total > sweep.max_cells)
      throw Error(ErrorKind::kInvalidArgument, "sweep exceeds " + std::to_string(sweep.max_cells) + " cells");
  }
  const bool strategy_axis = seen.contains("strategy");

  SweepResult result;
  for (std::size_t i = 0; i < total; ++i) {
    SweepCell cell;
    cell.index = i;
    cell.config = base;
    std::size_t rest = i;
    std::vector<std::size_t> digits(sweep.axes.size());
    for (std::size_t a = sweep.axes.size(); a-- > 0;) {
      digits[a] = rest % sweep.axes[a].second.size();
      rest /= sweep.axes[a].second.size();
    }
    for (std::size_t a = 0; a < sweep.axes.size(); ++a) {
      const auto& [axis, values] = sweep.axes[a];
      cell.values.emplace_back(axis, values[digits[a]]);
      apply_axis(cell.config, axis, values[digits[a]]);
    }
    if (strategy_axis) cell.config.label.clear();
    if (!base.output_dir.empty()) cell.config.output_dir = base.output_dir / "cells" / dir_name(i, cell.values);
    try {
      cell.report = run_experiment(cell.config).report;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    result.cells.push_back(std::move(cell));
  }

  std::vector<double> xs, ys;
  for (const auto& cell : result.cells) {
    if (!cell.report) continue;
    for (const auto& a : cell.report->attributes) {
      if (!a.ad || !a.composition_maxdiff) continue;
      result.scatter.push_back({cell.index, cell.report->meta.label, a.attribute, *a.composition_maxdiff, *a.ad});
      xs.push_back(*a.composition_maxdiff);
      ys.push_back(*a.ad);
    }
  }
  try {
    result.pearson = pearson(xs, ys);
  } catch (const Error&) {
    result.pearson.reset();
  }

  // Pair cells that agree on every axis but the pair axis: first value vs last.
  std::size_t pair_index = sweep.axes.size();
  for (std::size_t a = 0; a < sweep.axes.size(); ++a)
    if (sweep.axes[a].first == sweep.pair_axis && sweep.axes[a].second.size() >= 2) pair_index = a;
  if (pair_index < sweep.axes.size()) {
    const auto& pair_values = sweep.axes[pair_index].second;
    std::map<std::string, std::pair<const SweepCell*, const SweepCell*>> groups;
    std::vector<std::string> order;
    for (const auto& cell : result.cells) {
      const auto key = describe(cell.values, sweep.pair_axis);
      if (!groups.contains(key)) order.push_back(key);
      auto& slot = groups[key];
      const auto& v = cell.values[pair_index].second;
      if (v == pair_values.front()) slot.first = &cell;
      if (v == pair_values.back()) slot.second = &cell;
    }
    for (const auto& key : order) {
      const auto [from, to] = groups[key];
      if (!from || !to || !from->report || !to->report) continue;
      for (const auto& a : from->report->attributes) {
        const auto* b = to->report->find(a.attribute);
        if (!a.ad || !b || !b->ad) continue;
        result.changes.push_back({key, from->report->meta.label, a.attribute, pair_values.front(),
                                  pair_values.back(), *a.ad, *b->ad});
      }
    }
  }

  if (base.output_dir.empty()) return result;
  const auto& dir = base.output_dir;
  ensure_dir(dir);
  detail::write_text(dir / "config.snapshot", config_snapshot(base));

  std::string cells_csv = "cell";
  for (const auto& [axis, values] : sweep.axes) cells_csv += "," + csv_escape(axis);
  cells_csv += ",status,error,dir\n";
  std::string sweep_csv;
  std::vector<FairnessReport> reports;
  for (const auto& cell : result.cells) {
    cells_csv += std::to_string(cell.index);
    for (const auto& [axis, value] : cell.values) cells_csv += "," + csv_escape(value);
    cells_csv += std::string(",") + (cell.report ? "ok" : "failed") + "," + csv_escape(cell.error) + "," +
                 csv_escape(cell.config.output_dir.filename().string()) + "\n";
    if (!cell.report) continue;
    reports.push_back(*cell.report);
    const std::vector<FairnessReport> one{*cell.report};
    std::istringstream lines(report_csv(one));
    std::string line;
    std::getline(lines, line);
    if (sweep_csv.empty()) sweep_csv = "cell," + line + "\n";
    while (std::getline(lines, line)) sweep_csv += std::to_string(cell.index) + "," + line + "\n";
  }
  if (sweep_csv.empty()) {
    std::istringstream lines(report_csv({}));
    std::string line;
    std::getline(lines, line);
    sweep_csv = "cell," + line + "\n";
  }
  detail::write_text(dir / "cells.csv", cells_csv);
  detail::write_text(dir / "sweep.csv", sweep_csv);

  std::string scatter = "cell,label,attribute,composition_maxdiff,ad\n";
  for (const auto& s : result.scatter)
    scatter += std::to_string(s.cell) + "," + csv_escape(s.label) + "," + csv_escape(s.attribute) + "," +
               num(s.composition_maxdiff) + "," + num(s.ad) + "\n";
  detail::write_text(dir / "scatter.csv", scatter);

  std::string changes = "group,label,attribute,from,to,ad_from,ad_to,change_pp\n";
  for (const auto& c : result.changes)
    changes += csv_escape(c.group) + "," + csv_escape(c.label) + "," + csv_escape(c.attribute) + "," +
               csv_escape(c.from) + "," + csv_escape(c.to) + "," + num(c.ad_from) + "," + num(c.ad_to) + "," +
               num(c.change_pp()) + "\n";
  detail::write_text(dir / "changes.csv", changes);

  std::string md = "# Sweep summary\n\n";
  md += std::to_string(result.cells.size()) + " cells, " + std::to_string(reports.size()) + " completed.\n\n";
  if (!reports.empty()) {
    auto labelled = reports;
    for (std::size_t i = 0, r = 0; i < result.cells.size(); ++i)
      if (result.cells[i].report) labelled[r++].meta.label = describe(result.cells[i].values);
    TableOptions opts;
    opts.sort_by_avg_ad = false;
    md += render_fairness_table(labelled, opts) + "\n";
  }
  if (result.pearson) {
    char line[96];
    std::snprintf(line, sizeof line, "Pearson r (composition MaxDiff vs AD, %zu points): %.4f\n\n",
                  result.scatter.size(), *result.pearson);
    md += line;
  }
  for (const auto& cell : result.cells)
    if (!cell.report) md += "Cell " + std::to_string(cell.index) + " failed: " + cell.error + "\n";
  if (!result.changes.empty() && sweep.pair_axis == "pool_size") {
    // One change table per combination of the non-strategy, non-pair axes.
    std::map<std::string, std::vector<FairnessReport>> by_group;
    std::vector<std::string> order;
    for (const auto& cell : result.cells) {
      if (!cell.report) continue;
      std::vector<std::pair<std::string, std::string>> rest;
      for (const auto& v : cell.values)
        if (v.first != "strategy" && v.first != "pool_size") rest.push_back(v);
      const auto key = describe(rest);
      if (!by_group.contains(key)) order.push_back(key);
      by_group[key].push_back(*cell.report);
    }
    for (const auto& key : order) {
      const auto& group = by_group[key];
      std::set<std::size_t> sizes;
      for (const auto& r : group) sizes.insert(r.meta.pool_size);
      if (sizes.size() < 2) continue;
      for (const auto& attr : group.front().attributes) {
        md += "\n" + (key.empty() ? std::string() : key + ": ") + "AD change for " + attr.attribute + "\n\n";
        md += render_change_table(group, attr.attribute);
      }
    }
  }
  detail::write_text(dir / "summary.md", md);
  return result;
}

}  // namespace fads
