#include "fads/selectors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fads/error.hpp"
#include "fads/metrics.hpp"
#include "fads/random.hpp"
#include "records.hpp"

namespace fads {

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::kZeroShot: return "zero_shot";
    case Strategy::kRandom: return "random";
    case Strategy::kSimilarity: return "similarity";
    case Strategy::kKMeans: return "kmeans";
    case Strategy::kFads: return "fads";
    case Strategy::kFadsInteraction: return "fads_interaction";
    case Strategy::kFadsAdaptive: return "fads_adaptive";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (auto s : {Strategy::kZeroShot, Strategy::kRandom, Strategy::kSimilarity, Strategy::kKMeans,
                 Strategy::kFads, Strategy::kFadsInteraction, Strategy::kFadsAdaptive})
    if (to_string(s) == name) return s;
  throw Error(ErrorKind::kInvalidArgument, "unknown strategy " + std::string(name));
}

std::string display_name(Strategy s) {
  switch (s) {
    case Strategy::kZeroShot: return "Zero-shot";
    case Strategy::kRandom: return "Random";
    case Strategy::kSimilarity: return "Similarity";
    case Strategy::kKMeans: return "K-means";
    case Strategy::kFads: return "FADS";
    case Strategy::kFadsInteraction: return "FADS-Interaction";
    case Strategy::kFadsAdaptive: return "FADS-Adaptive";
  }
  return "Unknown";
}

bool needs_cluster_model(Strategy s) noexcept {
  return s == Strategy::kKMeans || is_fads_family(s);
}

bool is_fads_family(Strategy s) noexcept {
  return s == Strategy::kFads || s == Strategy::kFadsInteraction || s == Strategy::kFadsAdaptive;
}

namespace {

double vector_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

/// Per-call state shared by every strategy.
class Selection {
 public:
  Selection(const Pool& pool, const SelectionRequest& req, Strategy strategy)
      : pool_(pool), req_(req), excluded_(pool.size(), 0), taken_(pool.size(), 0) {
    set_.query_id = req.query_id;
    set_.strategy_name = std::string(to_string(strategy));
    if (std::find(std::begin(kStandardShots), std::end(kStandardShots), req.shots) ==
        std::end(kStandardShots))
      set_.warnings.push_back("NonStandardShots: " + std::to_string(req.shots));

    for (const auto& id : req.exclude_ids)
      if (auto r = pool.find(id)) excluded_[*r] = 1;
    if (auto r = pool.find(req.query_id)) excluded_[*r] = 1;  // leave-one-out
    eligible_ = static_cast<std::size_t>(std::count(excluded_.begin(), excluded_.end(), 0));

    if (req.shots == 0) return;
    if (req.shots > eligible_)
      throw Error(ErrorKind::kPoolTooSmall, "needed " + std::to_string(req.shots) + ", available " +
                                                std::to_string(eligible_));
    if (strategy != Strategy::kRandom) {
      if (req.query_embedding.size() != pool.embeddings().dim())
        throw Error(ErrorKind::kDimensionMismatch,
                    "query " + req.query_id + " has dim " + std::to_string(req.query_embedding.size()) +
                        ", pool has " + std::to_string(pool.embeddings().dim()));
      query_norm_ = vector_norm(req.query_embedding);
      if (query_norm_ == 0.0) throw Error(ErrorKind::kZeroNormVector, "query " + req.query_id);
    }
  }

  const Pool& pool() const { return pool_; }
  const SelectionRequest& req() const { return req_; }
  DemonstrationSet& set() { return set_; }
  bool excluded(std::size_t r) const { return excluded_[r] != 0; }
  bool taken(std::size_t r) const { return taken_[r] != 0; }

  std::vector<std::size_t> eligible_rows() const {
    std::vector<std::size_t> rows;
    rows.reserve(eligible_);
    for (std::size_t r = 0; r < pool_.size(); ++r)
      if (!excluded_[r]) rows.push_back(r);
    return rows;
  }

  /// Similarity-ranked rows; in sampled mode the order is a seeded shuffle.
  std::vector<ScoredRow> rank(std::span<const std::size_t> rows, bool allow_sampling = false) {
    std::vector<std::size_t> zero;
    auto ranked = rank_rows(req_.query_embedding, query_norm_, rows, pool_.embeddings(),
                            std::numeric_limits<std::size_t>::max(), &zero);
    for (std::size_t r : zero) {
      const auto& id = pool_.example(r).id;
      if (std::find(set_.zero_norm_skipped.begin(), set_.zero_norm_skipped.end(), id) ==
          set_.zero_norm_skipped.end())
        set_.zero_norm_skipped.push_back(id);
    }
    if (allow_sampling && req_.within_cell == WithinCell::kSampled) {
      Rng rng(stream_seed(req_.seed ^ 0x53414d504c45ULL, req_.query_id) ^ (rows.empty() ? 0 : rows.front()));
      for (std::size_t i = ranked.size(); i > 1; --i) std::swap(ranked[i - 1], ranked[uniform_index(rng, i)]);
    }
    return ranked;
  }

  std::vector<ScoredRow> rank_top(std::span<const std::size_t> rows, std::size_t k) {
    std::vector<std::size_t> zero;
    auto ranked = rank_rows(req_.query_embedding, query_norm_, rows, pool_.embeddings(), k, &zero);
    for (std::size_t r : zero) set_.zero_norm_skipped.push_back(pool_.example(r).id);
    return ranked;
  }

  void take(std::size_t r) {
    taken_[r] = 1;
    set_.demonstrations.push_back(pool_.example(r).id);
  }
  /// Marks without emitting, for strategies that order their output later.
  void reserve(std::size_t r) { taken_[r] = 1; }

  void borrow_into(std::vector<std::size_t>& out, std::span<const ScoredRow> from, std::size_t& need,
                   const std::string& group, const char* source) {
    for (const auto& s : from) {
      if (need == 0) break;
      if (taken_[s.row]) continue;
      reserve(s.row);
      out.push_back(s.row);
      set_.borrows.push_back({group, pool_.example(s.row).id, source});
      --need;
    }
  }

  DemonstrationSet finish() {
    if (req_.shuffle_order) {
      Rng rng(stream_seed(req_.seed ^ 0x4f52444552ULL, req_.query_id));
      auto& d = set_.demonstrations;
      for (std::size_t i = d.size(); i > 1; --i) std::swap(d[i - 1], d[uniform_index(rng, i)]);
    }
    describe_composition(pool_, set_);
    return std::move(set_);
  }

 private:
  const Pool& pool_;
  const SelectionRequest& req_;
  DemonstrationSet set_;
  std::vector<char> excluded_;
  std::vector<char> taken_;
  std::size_t eligible_ = 0;
  double query_norm_ = 0.0;
};

void check_model(const Pool& pool, const ClusterModel& model) {
  if (model.row_count() != pool.size() || model.cell_counts.size() != model.k ||
      model.attribute_names != pool.schema().names())
    throw Error(ErrorKind::kModelPoolMismatch, "cluster model was not built over this pool");
}

std::vector<std::size_t> filtered_rows(const ClusterModel& model, std::span<const std::size_t> clusters,
                                       const Selection& sel) {
  std::vector<std::size_t> rows;
  for (std::size_t c : clusters)
    for (std::size_t r : model.members[c])
      if (!sel.excluded(r)) rows.push_back(r);
  std::sort(rows.begin(), rows.end());
  return rows;
}

std::string cell_name(const SensitiveAttributeSchema& schema, std::size_t a, std::size_t category, int label) {
  return schema.categories(a)[category] + "|" + std::to_string(label);
}

DemonstrationSet select_interaction_impl(const Pool& pool, const ClusterModel& model,
                                         const SelectionRequest& req, bool adaptive) {
  Selection sel(pool, req, adaptive ? Strategy::kFadsAdaptive : Strategy::kFadsInteraction);
  if (req.shots == 0) return sel.finish();
  check_model(pool, model);
  const auto& schema = pool.schema();

  std::vector<std::size_t> attrs;
  if (req.attributes.empty()) {
    for (std::size_t a = 0; a < schema.size(); ++a) attrs.push_back(a);
  } else {
    for (const auto& name : req.attributes) attrs.push_back(schema.index_of(name));
  }
  if (attrs.empty()) throw Error(ErrorKind::kInvalidArgument, "no attributes to combine");
  const std::string stratify =
      req.stratify_attribute.empty() ? schema.name(attrs.front()) : req.stratify_attribute;

  std::size_t n_combos = 1;
  for (std::size_t a : attrs) n_combos *= schema.category_count(a);
  const auto combo_of = [&](std::size_t row) {
    std::size_t code = 0;
    for (std::size_t a : attrs) code = code * schema.category_count(a) + pool.example(row).attributes[a];
    return code;
  };
  const auto combo_name = [&](std::size_t code) {
    std::vector<std::string> parts(attrs.size());
    for (std::size_t i = attrs.size(); i-- > 0;) {
      const std::size_t n = schema.category_count(attrs[i]);
      parts[i] = schema.categories(attrs[i])[code % n];
      code /= n;
    }
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "|" : "") + parts[i];
    return out;
  };

  const std::size_t n_d = req.n_d ? req.n_d : default_n_d(model.k);
  const auto clusters = select_balanced_clusters(model, stratify, n_d);
  const auto g_rows = filtered_rows(model, clusters, sel);
  std::vector<char> in_g(pool.size(), 0);
  for (std::size_t r : g_rows) in_g[r] = 1;

  std::vector<std::size_t> pool_count(n_combos, 0);
  std::vector<std::vector<std::size_t>> g_members(n_combos), other_members(n_combos);
  for (std::size_t r = 0; r < pool.size(); ++r) {
    const std::size_t c = combo_of(r);
    ++pool_count[c];
    if (sel.excluded(r)) continue;
    (in_g[r] ? g_members : other_members)[c].push_back(r);
  }

  std::vector<std::size_t> minimum(n_combos, 0);
  std::size_t need_total = 0;
  for (std::size_t c = 0; c < n_combos; ++c) {
    if (pool_count[c] == 0) continue;
    const double freq = static_cast<double>(pool_count[c]) / static_cast<double>(pool.size());
    minimum[c] = (adaptive && freq < req.rarity_threshold) ? 1 : req.min_per_combo;
    need_total += minimum[c];
  }
  if (need_total > req.shots)
    sel.set().warnings.push_back("BudgetExhausted: minimums need " + std::to_string(need_total) +
                                 ", budget " + std::to_string(req.shots));

  std::vector<std::size_t> order(n_combos);
  for (std::size_t c = 0; c < n_combos; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return pool_count[x] > pool_count[y]; });

  std::vector<std::vector<std::size_t>> picks(n_combos);
  std::vector<GroupPick> diag(n_combos);
  std::size_t budget = req.shots;
  for (std::size_t c : order) {
    diag[c].group = combo_name(c);
    diag[c].quota = minimum[c];
    diag[c].available = g_members[c].size() + other_members[c].size();
    if (pool_count[c] == 0) continue;
    if (diag[c].available < minimum[c])
      sel.set().warnings.push_back("ComboUnderflow: " + diag[c].group + " needed " +
                                   std::to_string(minimum[c]) + " available " +
                                   std::to_string(diag[c].available));
    std::size_t want = std::min({minimum[c], budget, diag[c].available});
    budget -= want;
    sel.set().guaranteed_slots += want;
    for (const auto& s : sel.rank(g_members[c], true)) {
      if (want == 0) break;
      sel.reserve(s.row);
      picks[c].push_back(s.row);
      --want;
    }
    sel.borrow_into(picks[c], sel.rank(other_members[c]), want, diag[c].group, "full_pool");
  }

  for (std::size_t c = 0; c < n_combos; ++c) {
    for (std::size_t r : picks[c]) {
      sel.take(r);
      diag[c].picked.push_back(pool.example(r).id);
    }
    if (pool_count[c] != 0) sel.set().groups.push_back(std::move(diag[c]));
  }

  // Remaining budget by global similarity, filtered pool first.
  for (const auto& s : sel.rank(g_rows)) {
    if (budget == 0) break;
    if (sel.taken(s.row)) continue;
    sel.take(s.row);
    --budget;
  }
  if (budget > 0) {
    std::vector<std::size_t> overflow;
    sel.borrow_into(overflow, sel.rank(sel.eligible_rows()), budget, "fill", "full_pool");
    for (std::size_t r : overflow) sel.set().demonstrations.push_back(pool.example(r).id);
  }
  return sel.finish();
}

}  // namespace

DemonstrationSet select_zero_shot(const Pool& pool, const SelectionRequest& req) {
  SelectionRequest zero = req;
  zero.shots = 0;
  Selection sel(pool, zero, Strategy::kZeroShot);
  return sel.finish();
}

DemonstrationSet select_random(const Pool& pool, const SelectionRequest& req) {
  Selection sel(pool, req, Strategy::kRandom);
  if (req.shots == 0) return sel.finish();
  const auto rows = sel.eligible_rows();
  Rng rng(stream_seed(req.seed, req.query_id));
  for (std::size_t i : sample_without_replacement(rng, rows.size(), req.shots)) sel.take(rows[i]);
  return sel.finish();
}

DemonstrationSet select_similarity(const Pool& pool, const SelectionRequest& req) {
  Selection sel(pool, req, Strategy::kSimilarity);
  if (req.shots == 0) return sel.finish();
  const auto ranked = sel.rank_top(sel.eligible_rows(), req.shots);
  if (ranked.size() < req.shots)
    throw Error(ErrorKind::kPoolTooSmall, "needed " + std::to_string(req.shots) + ", available " +
                                              std::to_string(ranked.size()) + " with nonzero norm");
  for (const auto& s : ranked) sel.take(s.row);
  return sel.finish();
}

DemonstrationSet select_kmeans_baseline(const Pool& pool, const ClusterModel& model,
                                        const SelectionRequest& req) {
  Selection sel(pool, req, Strategy::kKMeans);
  if (req.shots == 0) return sel.finish();
  if (model.row_count() != pool.size())
    throw Error(ErrorKind::kModelPoolMismatch, "cluster model was not built over this pool");

  std::vector<std::vector<std::size_t>> eligible(model.k);
  std::vector<std::size_t> nonempty;
  for (std::size_t c = 0; c < model.k; ++c) {
    for (std::size_t r : model.members[c])
      if (!sel.excluded(r)) eligible[c].push_back(r);
    if (!eligible[c].empty()) nonempty.push_back(c);
  }

  Rng rng(stream_seed(req.seed, req.query_id));
  std::vector<std::size_t> drawn;
  std::vector<std::size_t> quota;
  if (req.shots <= nonempty.size()) {
    for (std::size_t i : sample_without_replacement(rng, nonempty.size(), req.shots)) drawn.push_back(nonempty[i]);
    quota.assign(drawn.size(), 1);
  } else {
    for (std::size_t i : sample_without_replacement(rng, nonempty.size(), nonempty.size()))
      drawn.push_back(nonempty[i]);
    const std::size_t base = req.shots / drawn.size();
    const std::size_t extra = req.shots % drawn.size();
    for (std::size_t i = 0; i < drawn.size(); ++i) quota.push_back(base + (i < extra ? 1 : 0));
    sel.set().warnings.push_back("ClusterFallback: " + std::to_string(req.shots) + " shots over " +
                                 std::to_string(drawn.size()) + " clusters");
  }

  std::size_t deficit = 0;
  for (std::size_t i = 0; i < drawn.size(); ++i) {
    const auto ranked = sel.rank_top(eligible[drawn[i]], quota[i]);
    GroupPick g{"cluster " + std::to_string(drawn[i]), quota[i], eligible[drawn[i]].size(), {}};
    for (const auto& s : ranked) {
      sel.take(s.row);
      g.picked.push_back(pool.example(s.row).id);
    }
    deficit += quota[i] - ranked.size();
    sel.set().groups.push_back(std::move(g));
  }
  if (deficit > 0) {
    std::vector<std::size_t> extra;
    sel.borrow_into(extra, sel.rank(sel.eligible_rows()), deficit, "fill", "full_pool");
    for (std::size_t r : extra) sel.set().demonstrations.push_back(pool.example(r).id);
  }
  return sel.finish();
}

DemonstrationSet select_fads(const Pool& pool, const ClusterModel& model, const SelectionRequest& req) {
  Selection sel(pool, req, Strategy::kFads);
  if (req.shots == 0) return sel.finish();
  if (req.stratify_attribute.empty())
    throw Error(ErrorKind::kInvalidArgument, "fads requires a stratify attribute");
  check_model(pool, model);
  const auto& schema = pool.schema();
  const std::size_t a = schema.index_of(req.stratify_attribute);

  const std::size_t n_d = req.n_d ? req.n_d : default_n_d(model.k);
  const auto clusters = select_balanced_clusters(model, req.stratify_attribute, n_d);
  const auto g_rows = filtered_rows(model, clusters, sel);

  const std::size_t n_categories = schema.category_count(a);
  const std::size_t n_cells = n_categories * 2;
  struct Cell {
    std::size_t category;
    int label;
    std::vector<std::size_t> rows;
    std::vector<ScoredRow> ranked;
    std::size_t quota = 0;
    std::vector<std::size_t> picked;
  };
  std::vector<Cell> cells;
  cells.reserve(n_cells);
  for (std::size_t c = 0; c < n_categories; ++c)
    for (int label : {1, 0}) cells.push_back({c, label, {}, {}, 0, {}});
  const auto cell_of = [&](std::size_t category, int label) { return category * 2 + (label == 1 ? 0 : 1); };
  for (std::size_t r : g_rows) {
    const auto& e = pool.example(r);
    cells[cell_of(e.attributes[a], e.label)].rows.push_back(r);
  }
  for (auto& cell : cells) cell.ranked = sel.rank(cell.rows, true);

  const std::size_t base = req.shots / n_cells;
  const std::size_t remainder = req.shots % n_cells;
  for (auto& cell : cells) cell.quota = base;
  if (remainder > 0) {
    std::vector<std::size_t> order(n_cells);
    for (std::size_t i = 0; i < n_cells; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      const bool hx = cells[x].ranked.size() > base;
      const bool hy = cells[y].ranked.size() > base;
      if (hx != hy) return hx;
      if (!hx) return false;
      return cells[x].ranked[base].similarity > cells[y].ranked[base].similarity;
    });
    for (std::size_t i = 0; i < remainder; ++i) ++cells[order[i]].quota;
  }

  for (auto& cell : cells) {
    for (std::size_t i = 0; i < std::min(cell.quota, cell.ranked.size()); ++i) {
      sel.reserve(cell.ranked[i].row);
      cell.picked.push_back(cell.ranked[i].row);
    }
  }

  std::vector<std::size_t> borrowed;
  std::vector<ScoredRow> global_g, global_pool;
  for (std::size_t i = 0; i < n_cells; ++i) {
    auto& cell = cells[i];
    std::size_t need = cell.quota - cell.picked.size();
    if (need == 0) continue;
    const std::string name = cell_name(schema, a, cell.category, cell.label);
    sel.set().warnings.push_back("CellUnderflow: " + name + " needed " + std::to_string(cell.quota) +
                                 " available " + std::to_string(cell.ranked.size()));
    sel.borrow_into(borrowed, cells[cell_of(cell.category, 1 - cell.label)].ranked, need, name,
                    "opposite_label");
    if (need > 0) {
      if (global_g.empty()) global_g = sel.rank(g_rows);
      sel.borrow_into(borrowed, global_g, need, name, "filtered_pool");
    }
    if (need > 0) {
      if (global_pool.empty()) global_pool = sel.rank(sel.eligible_rows());
      sel.borrow_into(borrowed, global_pool, need, name, "full_pool");
    }
    if (need > 0)
      throw Error(ErrorKind::kPoolTooSmall, "cell " + name + " short by " + std::to_string(need));
  }

  for (auto& cell : cells) {
    GroupPick g{cell_name(schema, a, cell.category, cell.label), cell.quota, cell.ranked.size(), {}};
    for (std::size_t r : cell.picked) {
      sel.set().demonstrations.push_back(pool.example(r).id);
      g.picked.push_back(pool.example(r).id);
    }
    sel.set().groups.push_back(std::move(g));
  }
  for (std::size_t r : borrowed) sel.set().demonstrations.push_back(pool.example(r).id);
  return sel.finish();
}

DemonstrationSet select_fads_interaction(const Pool& pool, const ClusterModel& model,
                                         const SelectionRequest& req) {
  return select_interaction_impl(pool, model, req, false);
}

DemonstrationSet select_fads_adaptive(const Pool& pool, const ClusterModel& model,
                                      const SelectionRequest& req) {
  return select_interaction_impl(pool, model, req, true);
}

void describe_composition(const Pool& pool, DemonstrationSet& set) {
  const auto& schema = pool.schema();
  set.composition.clear();
  set.maxdiff_per_attribute.clear();
  std::vector<std::size_t> rows;
  rows.reserve(set.demonstrations.size());
  for (const auto& id : set.demonstrations) {
    const auto r = pool.find(id);
    if (!r) throw Error(ErrorKind::kUnresolvedId, id);
    rows.push_back(*r);
  }
  const double n = static_cast<double>(rows.size());
  std::size_t positives = 0;
  for (std::size_t r : rows) positives += pool.example(r).label == 1 ? 1 : 0;
  set.label_ratio = rows.empty() ? 0.0 : static_cast<double>(positives) / n;
  for (std::size_t a = 0; a < schema.size(); ++a) {
    std::vector<std::size_t> counts(schema.category_count(a), 0);
    for (std::size_t r : rows) ++counts[pool.example(r).attributes[a]];
    auto& comp = set.composition[schema.name(a)];
    std::vector<double> ratios;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      const double ratio = rows.empty() ? 0.0 : static_cast<double>(counts[c]) / n;
      comp.emplace_back(schema.categories(a)[c], ratio);
      ratios.push_back(ratio);
    }
    if (!rows.empty()) set.maxdiff_per_attribute[schema.name(a)] = maxdiff(ratios);
  }
}

// ---------------------------------------------------------------------------

namespace {

class BoundSelector final : public Selector {
 public:
  BoundSelector(Strategy s, const Pool& pool, std::shared_ptr<const ClusterModel> model)
      : strategy_(s), pool_(pool), model_(std::move(model)) {
    if (needs_cluster_model(s) && !model_)
      throw Error(ErrorKind::kInvalidArgument, std::string(to_string(s)) + " needs a cluster model");
  }

  Strategy strategy() const noexcept override { return strategy_; }

  DemonstrationSet select(const SelectionRequest& req) const override {
    switch (strategy_) {
      case Strategy::kZeroShot: return select_zero_shot(pool_, req);
      case Strategy::kRandom: return select_random(pool_, req);
      case Strategy::kSimilarity: return select_similarity(pool_, req);
      case Strategy::kKMeans: return select_kmeans_baseline(pool_, *model_, req);
      case Strategy::kFads: return select_fads(pool_, *model_, req);
      case Strategy::kFadsInteraction: return select_fads_interaction(pool_, *model_, req);
      case Strategy::kFadsAdaptive: return select_fads_adaptive(pool_, *model_, req);
    }
    throw Error(ErrorKind::kInvalidArgument, "unknown strategy");
  }

 private:
  Strategy strategy_;
  const Pool& pool_;
  std::shared_ptr<const ClusterModel> model_;
};

std::string render(const std::string& tmpl, std::initializer_list<std::pair<std::string_view, std::string_view>> fields) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string::npos) {
        const std::string_view key(tmpl.data() + i + 1, close - i - 1);
        bool matched = false;
        for (const auto& [name, value] : fields) {
          if (name == key) {
            out.append(value);
            matched = true;
            break;
          }
        }
        if (matched) {
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

}  // namespace

std::unique_ptr<Selector> make_selector(Strategy strategy, const Pool& pool,
                                        std::shared_ptr<const ClusterModel> model) {
  return std::make_unique<BoundSelector>(strategy, pool, std::move(model));
}

PromptTemplate load_prompt_template(const std::filesystem::path& path) {
  const std::string text = detail::read_text(path);
  std::vector<std::string> sections(1);
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line == "---") {
      sections.emplace_back();
      continue;
    }
    if (!sections.back().empty()) sections.back() += '\n';
    sections.back() += line;
  }
  PromptTemplate t;
  if (sections.size() == 2) {
    t.demonstration = sections[0];
    t.query = sections[1];
  } else if (sections.size() == 3) {
    t.header = sections[0];
    t.demonstration = sections[1];
    t.query = sections[2];
  } else {
    throw Error(ErrorKind::kInvalidArgument,
                path.string() + ": expected 2 or 3 sections separated by '---' lines");
  }
  return t;
}

std::string assemble(const Pool& pool, const DemonstrationSet& set, const QueryExample& query,
                     const PromptTemplate& tmpl) {
  std::vector<std::string> blocks;
  if (!tmpl.header.empty()) blocks.push_back(tmpl.header);
  for (const auto& id : set.demonstrations) {
    const auto r = pool.find(id);
    if (!r) throw Error(ErrorKind::kUnresolvedId, id);
    const auto& e = pool.example(*r);
    blocks.push_back(render(tmpl.demonstration,
                            {{"payload", e.payload}, {"answer", e.label == 1 ? tmpl.positive : tmpl.negative}}));
  }
  blocks.push_back(render(tmpl.query, {{"query", query.payload}, {"payload", query.payload}}));
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) out += tmpl.separator;
    out += blocks[i];
  }
  return out;
}

}  // namespace fads
