#include "fads/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "fads/error.hpp"
#include "records.hpp"

namespace fads {

namespace {

constexpr const char* kColumns[] = {"label",    "strategy", "shots",     "seed",   "k",
                                    "n_d",      "pool_size", "queries",  "processed", "skipped",
                                    "accuracy", "precision", "recall",   "f1",     "attribute",
                                    "ad",       "avg_ad",   "composition_maxdiff", "subgroups"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string{}; }

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string subgroups_field(const std::vector<SubgroupAccuracy>& groups) {
  std::string out;
  for (const auto& g : groups) {
    if (!out.empty()) out += ';';
    out += g.category + ":" + std::to_string(g.count) + ":" + num(g.accuracy);
  }
  return out;
}

std::vector<SubgroupAccuracy> parse_subgroups(const std::string& field) {
  std::vector<SubgroupAccuracy> out;
  std::stringstream ss(field);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto p2 = item.rfind(':');
    const auto p1 = (p2 == std::string::npos || p2 == 0) ? std::string::npos : item.rfind(':', p2 - 1);
    if (p1 == std::string::npos)
      throw Error(ErrorKind::kMalformedRecord, "subgroup entry " + item);
    out.push_back({item.substr(0, p1), std::stoul(item.substr(p1 + 1, p2 - p1 - 1)),
                   std::stod(item.substr(p2 + 1))});
  }
  return out;
}

std::string run_key(const RunMeta& m) {
  return m.label + '\x1f' + m.strategy + '\x1f' + std::to_string(m.shots) + '\x1f' + std::to_string(m.seed) +
         '\x1f' + std::to_string(m.k) + '\x1f' + std::to_string(m.n_d) + '\x1f' + std::to_string(m.pool_size);
}

std::vector<std::string> attribute_columns(std::span<const FairnessReport> reports, const TableOptions& options) {
  if (!options.attributes.empty()) return options.attributes;
  std::vector<std::string> out;
  for (const auto& r : reports)
    for (const auto& a : r.attributes)
      if (std::find(out.begin(), out.end(), a.attribute) == out.end()) out.push_back(a.attribute);
  return out;
}

enum class Better { kHigher, kLower };

struct Column {
  std::string header;
  Better better;
  int decimals;
  bool boldable = true;
};

/// Renders a Markdown table, bolding every cell whose rendered value equals the
/// best rendered value of its column.
std::string render_table(const std::vector<std::string>& methods, const std::vector<Column>& columns,
                         const std::vector<std::vector<std::optional<double>>>& values, bool bold_best) {
  std::vector<std::vector<std::string>> text(methods.size(), std::vector<std::string>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    std::optional<double> best;
    for (std::size_t r = 0; r < methods.size(); ++r) {
      const auto& v = values[r][c];
      if (!v) continue;
      if (!best || (columns[c].better == Better::kHigher ? *v > *best : *v < *best)) best = v;
    }
    const std::string best_text = best ? format_fixed(*best, columns[c].decimals) : std::string{};
    for (std::size_t r = 0; r < methods.size(); ++r) {
      const auto& v = values[r][c];
      if (!v) {
        text[r][c] = "-";
        continue;
      }
      const std::string s = format_fixed(*v, columns[c].decimals);
      text[r][c] = (bold_best && columns[c].boldable && s == best_text) ? "**" + s + "**" : s;
    }
  }
  std::ostringstream out;
  out << "| Method |";
  for (const auto& c : columns) out << ' ' << c.header << " |";
  out << "\n| --- |";
  for (std::size_t c = 0; c < columns.size(); ++c) out << " ---: |";
  out << '\n';
  for (std::size_t r = 0; r < methods.size(); ++r) {
    out << "| " << methods[r] << " |";
    for (const auto& cell : text[r]) out << ' ' << cell << " |";
    out << '\n';
  }
  return out.str();
}

std::optional<double> percent(const std::optional<double>& v) {
  if (!v) return std::nullopt;
  return *v * 100.0;
}

}  // namespace

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          out.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

std::string report_csv(std::span<const FairnessReport> reports) {
  std::ostringstream out;
  for (std::size_t i = 0; i < std::size(kColumns); ++i) out << (i ? "," : "") << kColumns[i];
  out << '\n';
  for (const auto& r : reports) {
    const auto& m = r.meta;
    for (const auto& a : r.attributes) {
      const std::vector<std::string> fields = {
          m.label, m.strategy, std::to_string(m.shots), std::to_string(m.seed), std::to_string(m.k),
          std::to_string(m.n_d), std::to_string(m.pool_size), std::to_string(m.queries),
          std::to_string(m.processed), std::to_string(m.skipped), num(r.overall.accuracy),
          num(r.overall.precision), num(r.overall.recall), num(r.overall.f1), a.attribute, num(a.ad),
          num(r.avg_ad), num(a.composition_maxdiff), subgroups_field(a.subgroups)};
      for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_escape(fields[i]);
      out << '\n';
    }
  }
  return out.str();
}

void write_report_csv(std::span<const FairnessReport> reports, const std::filesystem::path& path) {
  detail::write_text(path, report_csv(reports));
}

std::vector<FairnessReport> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<FairnessReport> reports;
  std::map<std::string, std::size_t> by_key;
  std::vector<bool> avg_given;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = csv_split(line);
    if (header.empty()) {
      header = std::move(fields);
      if (std::find(header.begin(), header.end(), "attribute") == header.end())
        throw Error(ErrorKind::kMalformedRecord, "report csv lacks an attribute column");
      continue;
    }
    if (fields.size() != header.size())
      throw Error(ErrorKind::kMalformedRecord, "report csv line " + std::to_string(line_no) + " has " +
                                                   std::to_string(fields.size()) + " fields, header has " +
                                                   std::to_string(header.size()));
    const auto get = [&](const char* name) -> std::string {
      const auto it = std::find(header.begin(), header.end(), name);
      return it == header.end() ? std::string{} : fields[static_cast<std::size_t>(it - header.begin())];
    };
    const auto opt = [&](const char* name) -> std::optional<double> {
      const auto s = get(name);
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    const auto count = [&](const char* name) -> std::size_t {
      const auto s = get(name);
      return s.empty() ? 0 : std::stoull(s);
    };
    try {
      RunMeta m;
      m.label = get("label");
      m.strategy = get("strategy");
      if (m.label.empty()) m.label = m.strategy;
      m.shots = count("shots");
      m.seed = count("seed");
      m.k = count("k");
      m.n_d = count("n_d");
      m.pool_size = count("pool_size");
      m.queries = count("queries");
      m.processed = count("processed");
      m.skipped = count("skipped");
      const auto key = run_key(m);
      auto [it, inserted] = by_key.emplace(key, reports.size());
      if (inserted) {
        FairnessReport r;
        r.meta = m;
        r.overall.accuracy = opt("accuracy").value_or(0.0);
        r.overall.precision = opt("precision").value_or(0.0);
        r.overall.recall = opt("recall").value_or(0.0);
        r.overall.f1 = opt("f1").value_or(0.0);
        r.avg_ad = opt("avg_ad");
        avg_given.push_back(r.avg_ad.has_value());
        reports.push_back(std::move(r));
      }
      AttributeFairness a;
      a.attribute = get("attribute");
      a.ad = opt("ad");
      a.composition_maxdiff = opt("composition_maxdiff");
      a.subgroups = parse_subgroups(get("subgroups"));
      reports[it->second].attributes.push_back(std::move(a));
    } catch (const std::invalid_argument&) {
      throw Error(ErrorKind::kMalformedRecord, "report csv line " + std::to_string(line_no));
    } catch (const std::out_of_range&) {
      throw Error(ErrorKind::kMalformedRecord, "report csv line " + std::to_string(line_no));
    }
  }
  for (std::size_t i = 0; i < reports.size(); ++i)
    if (!avg_given[i]) reports[i].avg_ad = average_ad(reports[i].attributes);
  return reports;
}

std::vector<FairnessReport> read_report_csv(const std::filesystem::path& path) {
  return parse_report_csv(detail::read_text(path));
}

std::string render_fairness_table(std::span<const FairnessReport> reports, const TableOptions& options) {
  std::vector<const FairnessReport*> rows;
  for (const auto& r : reports) rows.push_back(&r);
  if (options.sort_by_avg_ad) {
    std::stable_sort(rows.begin(), rows.end(), [](const FairnessReport* x, const FairnessReport* y) {
      const double ax = x->avg_ad.value_or(std::numeric_limits<double>::infinity());
      const double ay = y->avg_ad.value_or(std::numeric_limits<double>::infinity());
      return ax < ay;
    });
  }
  const auto attrs = attribute_columns(reports, options);
  std::vector<Column> columns{{"Accuracy (%)", Better::kHigher, options.accuracy_decimals}};
  for (const auto& a : attrs) columns.push_back({capitalize(a) + " AD (%)", Better::kLower, options.decimals});
  columns.push_back({"Avg AD (%)", Better::kLower, options.decimals});

  std::vector<std::string> methods;
  std::vector<std::vector<std::optional<double>>> values;
  for (const auto* r : rows) {
    methods.push_back(r->meta.label);
    std::vector<std::optional<double>> v{r->overall.accuracy * 100.0};
    for (const auto& a : attrs) {
      const auto* f = r->find(a);
      v.push_back(f ? percent(f->ad) : std::nullopt);
    }
    v.push_back(percent(r->avg_ad));
    values.push_back(std::move(v));
  }
  return render_table(methods, columns, values, options.bold_best);
}

std::string render_composition_table(std::span<const FairnessReport> reports, const TableOptions& options) {
  const auto attrs = attribute_columns(reports, options);
  std::vector<Column> columns;
  for (const auto& a : attrs) columns.push_back({capitalize(a), Better::kLower, options.decimals});
  std::vector<std::string> methods;
  std::vector<std::vector<std::optional<double>>> values;
  for (const auto& r : reports) {
    methods.push_back(r.meta.label);
    std::vector<std::optional<double>> v;
    for (const auto& a : attrs) {
      const auto* f = r.find(a);
      v.push_back(f ? percent(f->composition_maxdiff) : std::nullopt);
    }
    values.push_back(std::move(v));
  }
  return render_table(methods, columns, values, options.bold_best);
}

std::string pool_size_label(std::size_t n) {
  if (n < 1000) return std::to_string(n);
  char buf[32];
  if (n % 1000 == 0)
    std::snprintf(buf, sizeof buf, "%zuK", n / 1000);
  else
    std::snprintf(buf, sizeof buf, "%gK", static_cast<double>(n) / 1000.0);
  return buf;
}

std::string render_change_table(std::span<const FairnessReport> reports, const std::string& attribute,
                                const TableOptions& options) {
  std::set<std::size_t> sizes;
  std::vector<std::string> labels;
  for (const auto& r : reports) {
    sizes.insert(r.meta.pool_size);
    if (std::find(labels.begin(), labels.end(), r.meta.label) == labels.end()) labels.push_back(r.meta.label);
  }
  if (sizes.size() < 2)
    throw Error(ErrorKind::kInvalidArgument, "change table needs runs at two pool sizes");
  const std::size_t small = *sizes.begin();
  const std::size_t large = *sizes.rbegin();
  const std::string attr = capitalize(attribute);
  // Only the change column competes for bold; the raw ADs are context.
  const std::vector<Column> columns{
      {pool_size_label(small) + " " + attr + " AD (%)", Better::kLower, options.decimals, false},
      {pool_size_label(large) + " " + attr + " AD (%)", Better::kLower, options.decimals, false},
      {"Change (pp)", Better::kLower, options.decimals, true}};
  const auto ad_at = [&](const std::string& label, std::size_t size) -> std::optional<double> {
    for (const auto& r : reports) {
      if (r.meta.label != label || r.meta.pool_size != size) continue;
      if (const auto* f = r.find(attribute)) return f->ad;
    }
    return std::nullopt;
  };
  std::vector<std::vector<std::optional<double>>> values;
  for (const auto& label : labels) {
    const auto a = ad_at(label, small);
    const auto b = ad_at(label, large);
    std::optional<double> change;
    if (a && b) change = (*b - *a) * 100.0;
    values.push_back({percent(a), percent(b), change});
  }
  return render_table(labels, columns, values, options.bold_best);
}

}  // namespace fads
