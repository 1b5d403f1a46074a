#ifndef MC3G_SEARCH_HPP
#define MC3G_SEARCH_HPP

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mc3g/blackbox.hpp"
#include "mc3g/causal.hpp"
#include "mc3g/cost.hpp"
#include "mc3g/dataset.hpp"
#include "mc3g/error.hpp"
#include "mc3g/learner.hpp"
#include "mc3g/rules.hpp"
#include "mc3g/schema.hpp"

namespace mc3g {

// ---------------------------------------------------------------------------
// Candidate states

enum class CandidateStrategy { dataset_rows, rule_grid, hybrid };

inline std::string_view to_string(CandidateStrategy s) {
  switch (s) {
    case CandidateStrategy::dataset_rows:
      return "dataset";
    case CandidateStrategy::rule_grid:
      return "grid";
    case CandidateStrategy::hybrid:
      return "hybrid";
  }
  return "?";
}

inline CandidateStrategy parse_candidate_strategy(std::string_view text) {
  if (text == "dataset" || text == "dataset-rows") return CandidateStrategy::dataset_rows;
  if (text == "grid" || text == "rule-grid") return CandidateStrategy::rule_grid;
  if (text == "hybrid") return CandidateStrategy::hybrid;
  throw ConfigError("unknown candidate strategy '" + std::string(text) + "'");
}

struct CandidateSource {
  CandidateStrategy strategy = CandidateStrategy::dataset_rows;
  // Numeric grid values sit one step either side of every rule threshold;
  // the step is this fraction of the feature's normalization range unless
  // `grid_step` names the feature.
  double grid_step_fraction = 0.01;
  std::map<std::string, double> grid_step;
  std::size_t max_grid_states = 1'000'000;
};

/// An indexable, immutable collection of candidate states: an optional
/// cross-product grid followed by explicit rows.
class CandidateSet {
 public:
  CandidateSet() = default;
  CandidateSet(SchemaPtr schema, std::vector<std::vector<double>> axes,
               std::vector<std::vector<double>> rows)
      : schema_(std::move(schema)), axes_(std::move(axes)), rows_(std::move(rows)) {
    grid_size_ = 0;
    if (!axes_.empty()) {
      grid_size_ = 1;
      for (const auto& a : axes_) grid_size_ *= a.size();
    }
  }

  std::size_t size() const { return grid_size_ + rows_.size(); }
  std::size_t grid_size() const { return grid_size_; }
  const std::vector<std::vector<double>>& axes() const { return axes_; }
  const SchemaPtr& schema() const { return schema_; }

  // Writes candidate i into `out` (one slot per feature).
  void fill(std::size_t i, std::span<double> out) const {
    if (i < grid_size_) {
      // Mixed radix, last feature fastest.
      for (std::size_t f = axes_.size(); f-- > 0;) {
        const auto& axis = axes_[f];
        out[f] = axis[i % axis.size()];
        i /= axis.size();
      }
      return;
    }
    const auto& row = rows_[i - grid_size_];
    std::copy(row.begin(), row.end(), out.begin());
  }

  State state(std::size_t i) const {
    std::vector<double> v(schema_->size());
    fill(i, v);
    return State(schema_, std::move(v));
  }

  std::vector<State> states() const {
    std::vector<State> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(state(i));
    return out;
  }

 private:
  SchemaPtr schema_;
  std::vector<std::vector<double>> axes_;
  std::vector<std::vector<double>> rows_;
  std::size_t grid_size_ = 0;
};

namespace detail {

inline void collect_thresholds(const Literal& l, std::vector<std::vector<double>>& marks) {
  marks[l.index].push_back(l.value);
  if (l.op == Op::in) marks[l.index].push_back(l.upper);
}

inline void collect_thresholds(const DecisionRule& r, std::vector<std::vector<double>>& marks) {
  for (const auto& l : r.body) collect_thresholds(l, marks);
  for (const auto& e : r.exceptions) collect_thresholds(e, marks);
}

}  // namespace detail

/// Per-feature value sets of the rule grid.
///
/// Discrete features contribute every level. Numeric features contribute
/// their domain endpoints, the anchor's value, and each threshold of Q and C
/// together with its neighbours one step away, clipped to the domain.
inline std::vector<std::vector<double>> grid_axes(const Schema& schema, const DecisionRuleSet& q,
                                                  const CausalRuleSet& c,
                                                  const CandidateSource& source,
                                                  const State* anchor) {
  std::vector<std::vector<double>> marks(schema.size());
  for (const auto& r : q.rules) detail::collect_thresholds(r, marks);
  for (const auto& r : c.rules()) {
    for (const auto& l : r.antecedent) detail::collect_thresholds(l, marks);
    detail::collect_thresholds(r.consequent, marks);
  }

  std::vector<std::vector<double>> axes(schema.size());
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const auto& feat = schema[f];
    auto& axis = axes[f];
    if (feat.is_discrete()) {
      for (std::size_t v = 0; v < feat.level_count(); ++v) axis.push_back(static_cast<double>(v));
      continue;
    }
    double step = feat.scale * source.grid_step_fraction;
    if (auto it = source.grid_step.find(feat.name); it != source.grid_step.end()) step = it->second;
    if (!(step > 0.0)) throw ConfigError("grid step for '" + feat.name + "' must be positive");
    axis.push_back(feat.lo);
    axis.push_back(feat.hi);
    if (anchor) axis.push_back((*anchor)[f]);
    for (double t : marks[f])
      for (double v : {t - step, t, t + step})
        if (feat.contains(v)) axis.push_back(v);
    std::sort(axis.begin(), axis.end());
    axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
  }
  return axes;
}

inline CandidateSet generate_candidates(const CandidateSource& source, const Dataset& data,
                                        const DecisionRuleSet& q, const CausalRuleSet& c = {},
                                        const State* anchor = nullptr) {
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<double>> axes;
  const bool want_grid = source.strategy != CandidateStrategy::dataset_rows;
  const bool want_rows = source.strategy != CandidateStrategy::rule_grid;

  if (want_grid) {
    axes = grid_axes(*data.schema, q, c, source, anchor);
    double projected = 1.0;
    for (const auto& a : axes) projected *= static_cast<double>(a.size());
    if (projected > static_cast<double>(source.max_grid_states))
      throw GridTooLarge("rule grid would hold " + format_number(projected) +
                         " states, above the cap of " + std::to_string(source.max_grid_states) +
                         "; coarsen the grid or raise the cap");
  }

  if (want_rows) {
    std::set<std::vector<double>> seen;
    for (const auto& r : data.rows) {
      std::vector<double> v(r.values().begin(), r.values().end());
      if (want_grid) {
        bool in_grid = true;
        for (std::size_t f = 0; f < v.size() && in_grid; ++f)
          in_grid = std::binary_search(axes[f].begin(), axes[f].end(), v[f]);
        if (in_grid || !seen.insert(v).second) continue;
      }
      rows.push_back(std::move(v));
    }
  }
  return CandidateSet(data.schema, std::move(axes), std::move(rows));
}

// ---------------------------------------------------------------------------
// Search

enum class CostMode { mc3g, standard };

inline std::string_view to_string(CostMode m) {
  return m == CostMode::mc3g ? "mc3g" : "standard";
}

inline CostMode parse_cost_mode(std::string_view text) {
  if (text == "mc3g") return CostMode::mc3g;
  if (text == "standard") return CostMode::standard;
  throw ConfigError("unknown cost mode '" + std::string(text) + "'");
}

struct SearchOptions {
  Norm norm = Norm::l1;
  std::size_t k = 1;
  CostMode mode = CostMode::mc3g;
  // Worker threads; 0 means one per hardware thread.
  unsigned jobs = 1;
};

struct CounterfactualResult {
  State state;
  ChangeLedger ledger;
  CostBreakdown cost;
  std::size_t rank = 0;
};

enum class SearchStatus { found, no_counterfactual };

inline std::string_view to_string(SearchStatus s) {
  return s == SearchStatus::found ? "found" : "no_counterfactual";
}

struct SearchOutcome {
  SearchStatus status = SearchStatus::no_counterfactual;
  std::vector<CounterfactualResult> results;  // ascending cost
  std::size_t candidates = 0;
  std::size_t valid = 0;
};

namespace detail {

struct Ranked {
  double cost;
  std::size_t direct;
  std::vector<double> values;
};

// Lower cost, then fewer direct changes, then lexicographic state order.
inline bool ranks_before(const Ranked& a, const Ranked& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  if (a.direct != b.direct) return a.direct < b.direct;
  return a.values < b.values;
}

class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}

  bool admits(double cost) const { return items_.size() < k_ || cost <= items_.back().cost; }

  void offer(Ranked r) {
    auto at = std::lower_bound(items_.begin(), items_.end(), r, ranks_before);
    if (at != items_.end() && at->values == r.values) return;
    if (items_.size() == k_ && at == items_.end()) return;
    items_.insert(at, std::move(r));
    if (items_.size() > k_) items_.pop_back();
  }

  std::vector<Ranked>& items() { return items_; }

 private:
  std::size_t k_;
  std::vector<Ranked> items_;
};

}  // namespace detail

/// Scans every candidate, keeps valid counterfactuals of `s0` and returns
/// the k cheapest. Output does not depend on `jobs`.
inline SearchOutcome search_counterfactuals(const DecisionRuleSet& q, const CausalRuleSet& c,
                                            const State& s0, const CandidateSet& candidates,
                                            const Weights& w, const SearchOptions& options) {
  if (options.k < 1) throw ConfigError("k must be at least 1");
  const auto& schema = s0.schema();
  if (candidates.schema() && !candidates.schema()->compatible_with(schema))
    throw SchemaMismatch("candidates and instance use different schemas");
  check_causal_schema(c, schema);
  for (const auto& r : q.rules) detail::check_rule_against(r, schema);
  check_weights(w, schema.size());
  if (!q.compliant(s0.values()))
    throw NotAdverse("instance " + s0.to_string() + " already receives '" + q.favorable + "'");

  const std::size_t total = candidates.size();
  unsigned jobs = options.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                    : options.jobs;
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(total, 1)));

  struct Partial {
    detail::TopK best;
    std::size_t valid = 0;
  };
  std::vector<Partial> partials(jobs, Partial{detail::TopK(options.k), 0});

  auto work = [&](unsigned job) {
    const std::size_t begin = total * job / jobs;
    const std::size_t end = total * (job + 1) / jobs;
    auto& part = partials[job];
    std::vector<double> v(schema.size());
    for (std::size_t i = begin; i < end; ++i) {
      candidates.fill(i, v);
      auto check = check_counterfactual(schema, s0.values(), v, c, q, w);
      if (!check.valid) continue;
      ++part.valid;
      const Weights& used = options.mode == CostMode::mc3g ? check.ledger.adjusted_weights : w;
      const double cost = weighted_lp(schema, s0.values(), v, used, options.norm);
      if (!part.best.admits(cost)) continue;
      part.best.offer({cost, check.ledger.direct.size(), v});
    }
  };

  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(jobs);
    for (unsigned j = 0; j < jobs; ++j) threads.emplace_back(work, j);
    for (auto& t : threads) t.join();
  }

  detail::TopK merged(options.k);
  SearchOutcome out;
  out.candidates = total;
  for (auto& p : partials) {
    out.valid += p.valid;
    for (auto& r : p.best.items()) merged.offer(std::move(r));
  }

  for (auto& r : merged.items()) {
    CounterfactualResult res;
    res.state = State(s0.schema_ptr(), std::move(r.values));
    res.ledger = label_changes(s0.values(), res.state.values(), c, w);
    const Weights& used = options.mode == CostMode::mc3g ? res.ledger.adjusted_weights : w;
    res.cost = compute_weighted_Lp(s0, res.state, used, options.norm);
    res.rank = out.results.size() + 1;
    out.results.push_back(std::move(res));
  }
  out.status = out.results.empty() ? SearchStatus::no_counterfactual : SearchStatus::found;
  return out;
}

struct Mc3gOutcome {
  DecisionRuleSet rules;
  SearchOutcome search;
};

/// Extracts Q from the model, then searches the candidate source for the
/// minimal-cost causally consistent counterfactual(s) of `s0`.
inline Mc3gOutcome mc3g(BlackBox& model, const Dataset& data, const State& s0,
                        const CausalRuleSet& c, const CandidateSource& source, const Weights& w,
                        const SearchOptions& options, const LearnerConfig& learner = {}) {
  Mc3gOutcome out;
  out.rules = extract_logic(model, data, learner);
  if (!is_decision_compliant(s0, out.rules))
    throw NotAdverse("instance " + s0.to_string() + " already receives '" +
                     out.rules.favorable + "'");
  auto candidates = generate_candidates(source, data, out.rules, c, &s0);
  out.search = search_counterfactuals(out.rules, c, s0, candidates, w, options);
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark

struct BenchmarkConfig {
  std::string dataset = "dataset";
  std::vector<Norm> norms{Norm::l1, Norm::l2, Norm::l0};
  std::size_t k = 20;
  std::vector<CostMode> modes{CostMode::standard, CostMode::mc3g};
  CandidateSource source;
  unsigned jobs = 1;
};

struct BenchmarkInstance {
  std::size_t row = 0;
  State state;
};

struct InstanceRun {
  std::size_t row = 0;
  CostMode mode = CostMode::mc3g;
  Norm norm = Norm::l1;
  SearchStatus status = SearchStatus::no_counterfactual;
  std::vector<CounterfactualResult> results;
  // Cost of each returned state under unadjusted schema weights.
  std::vector<double> standard_costs;
  std::size_t causally_compliant = 0;
  // Returned states the original model labels favorable / could label.
  std::size_t blackbox_favorable = 0;
  std::size_t blackbox_checked = 0;
};

struct BenchmarkRow {
  CostMode mode = CostMode::mc3g;
  Norm norm = Norm::l1;
  double nearest = 0.0;   // K=1
  double kth = 0.0;       // K=k (or the furthest returned when fewer)
  double average = 0.0;   // mean over the returned top-k
  std::size_t found = 0;
  std::size_t instances = 0;
  double compliance_pct = 0.0;
  double blackbox_agreement_pct = 0.0;
};

struct BenchmarkReport {
  std::string dataset;
  std::size_t k = 0;
  CandidateStrategy strategy = CandidateStrategy::dataset_rows;
  DecisionRuleSet rules;
  std::vector<BenchmarkRow> rows;
  std::vector<InstanceRun> runs;
};

namespace detail {

inline std::vector<std::optional<std::string>> label_states(BlackBox& model,
                                                            std::span<const State> states) {
  std::vector<std::optional<std::string>> out(states.size());
  if (states.empty()) return out;
  try {
    auto labels = model.predict(states);
    for (std::size_t i = 0; i < states.size() && i < labels.size(); ++i) out[i] = labels[i];
  } catch (const MissingPrediction&) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      try {
        out[i] = model.predict(states.subspan(i, 1)).at(0);
      } catch (const MissingPrediction&) {
      }
    }
  }
  return out;
}

}  // namespace detail

/// Top-k counterfactuals for every instance under every (mode, norm) pair,
/// summarized in the layout of a nearest/furthest/average distance table.
inline BenchmarkReport benchmark_with_rules(BlackBox& model, const DecisionRuleSet& q,
                                            const Dataset& data,
                                            std::span<const BenchmarkInstance> instances,
                                            const CausalRuleSet& c, const Weights& w,
                                            const BenchmarkConfig& config) {
  BenchmarkReport report;
  report.dataset = config.dataset;
  report.k = config.k;
  report.strategy = config.source.strategy;
  report.rules = q;

  for (const auto& inst : instances)
    if (!is_decision_compliant(inst.state, q))
      throw NotAdverse("benchmark instance at row " + std::to_string(inst.row) +
                       " is not adverse");

  std::vector<State> to_label;
  for (auto mode : config.modes) {
    for (auto norm : config.norms) {
      SearchOptions opt{norm, config.k, mode, config.jobs};
      for (const auto& inst : instances) {
        auto candidates = generate_candidates(config.source, data, q, c, &inst.state);
        auto found = search_counterfactuals(q, c, inst.state, candidates, w, opt);
        InstanceRun run;
        run.row = inst.row;
        run.mode = mode;
        run.norm = norm;
        run.status = found.status;
        run.results = std::move(found.results);
        for (const auto& r : run.results) {
          run.standard_costs.push_back(weighted_lp(inst.state.schema(), inst.state.values(),
                                                   r.state.values(), w, norm));
          if (is_causally_consistent(r.state, c) && !is_decision_compliant(r.state, q))
            ++run.causally_compliant;
          to_label.push_back(r.state);
        }
        report.runs.push_back(std::move(run));
      }
    }
  }

  auto labels = detail::label_states(model, to_label);
  std::size_t next = 0;
  for (auto& run : report.runs)
    for (std::size_t i = 0; i < run.results.size(); ++i, ++next)
      if (labels[next]) {
        ++run.blackbox_checked;
        if (*labels[next] != q.undesired) ++run.blackbox_favorable;
      }

  for (auto mode : config.modes) {
    for (auto norm : config.norms) {
      BenchmarkRow row;
      row.mode = mode;
      row.norm = norm;
      std::size_t emitted = 0, compliant = 0, checked = 0, favorable = 0;
      for (const auto& run : report.runs) {
        if (run.mode != mode || run.norm != norm) continue;
        ++row.instances;
        if (run.results.empty()) continue;
        ++row.found;
        row.nearest += run.results.front().cost.total;
        row.kth += run.results[std::min(config.k, run.results.size()) - 1].cost.total;
        double sum = 0.0;
        for (const auto& r : run.results) sum += r.cost.total;
        row.average += sum / static_cast<double>(run.results.size());
        emitted += run.results.size();
        compliant += run.causally_compliant;
        checked += run.blackbox_checked;
        favorable += run.blackbox_favorable;
      }
      if (row.found) {
        row.nearest /= static_cast<double>(row.found);
        row.kth /= static_cast<double>(row.found);
        row.average /= static_cast<double>(row.found);
      }
      row.compliance_pct =
          emitted ? 100.0 * static_cast<double>(compliant) / static_cast<double>(emitted) : 100.0;
      row.blackbox_agreement_pct =
          checked ? 100.0 * static_cast<double>(favorable) / static_cast<double>(checked) : 0.0;
      report.rows.push_back(row);
    }
  }
  return report;
}

inline BenchmarkReport benchmark(BlackBox& model, const Dataset& data,
                                 std::span<const BenchmarkInstance> instances,
                                 const CausalRuleSet& c, const Weights& w,
                                 const BenchmarkConfig& config,
                                 const LearnerConfig& learner = {}) {
  auto q = extract_logic(model, data, learner);
  return benchmark_with_rules(model, q, data, instances, c, w, config);
}

}  // namespace mc3g

#endif  // MC3G_SEARCH_HPP
