#ifndef MC3G_LEARNER_HPP
#define MC3G_LEARNER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mc3g/blackbox.hpp"
#include "mc3g/dataset.hpp"
#include "mc3g/error.hpp"
#include "mc3g/rules.hpp"
#include "mc3g/schema.hpp"

namespace mc3g {

enum class SplitMode { all_midpoints, quantiles };
enum class Impurity { gini };

struct SplitCandidates {
  SplitMode mode = SplitMode::quantiles;
  std::size_t k = 32;
};

struct LearnerConfig {
  std::size_t max_exception_depth = kDefaultMaxExceptionDepth;
  // Rules covering fewer undesired examples than this fraction end learning.
  double min_coverage_fraction = 0.02;
  SplitCandidates split_candidates;
  Impurity impurity = Impurity::gini;
  // Literal selection is fully deterministic; kept for reproducible runs
  // that record it alongside the learned rules.
  std::uint64_t seed = 0;
  // A rule stops specializing and learns exceptions once its false
  // positives drop to ratio * true positives.
  double exception_ratio = 0.5;
  std::string undesired_label;
  // Empty: the other label present in the data.
  std::string favorable_label;

  void validate() const {
    if (!(min_coverage_fraction > 0.0 && min_coverage_fraction < 1.0))
      throw ConfigError("min_coverage_fraction must lie in (0, 1)");
    if (split_candidates.mode == SplitMode::quantiles && split_candidates.k < 2)
      throw ConfigError("quantile split candidates need k >= 2");
    if (!(exception_ratio >= 0.0) || !std::isfinite(exception_ratio))
      throw ConfigError("exception_ratio must be >= 0");
    if (undesired_label.empty()) throw ConfigError("the undesired class label is not set");
  }
};

namespace detail {

// Sequential covering with Gini-scored literals and recursive exceptions.
class FoldLearner {
 public:
  FoldLearner(const Schema& schema, std::vector<std::span<const double>> rows,
              const LearnerConfig& config, std::string head)
      : schema_(schema), rows_(std::move(rows)), config_(config), head_(std::move(head)) {}

  std::vector<DecisionRule> learn(const std::vector<std::size_t>& pos,
                                  const std::vector<std::size_t>& neg) {
    auto min_count = static_cast<std::size_t>(
        std::ceil(config_.min_coverage_fraction * static_cast<double>(pos.size())));
    return fold(pos, neg, 0, std::max<std::size_t>(min_count, 1));
  }

 private:
  using Index = std::vector<std::size_t>;

  std::vector<DecisionRule> fold(Index pos, const Index& neg, std::size_t depth,
                                 std::size_t min_count) {
    std::vector<DecisionRule> rules;
    while (!pos.empty()) {
      auto [rule, covered] = learn_rule(pos, neg, depth);
      if (covered.empty() || covered.size() < min_count) break;
      Index rest;
      std::set_difference(pos.begin(), pos.end(), covered.begin(), covered.end(),
                          std::back_inserter(rest));
      pos = std::move(rest);
      rules.push_back(std::move(rule));
    }
    return rules;
  }

  std::pair<DecisionRule, Index> learn_rule(const Index& pos, const Index& neg,
                                            std::size_t depth) {
    DecisionRule rule;
    rule.head = head_;
    Index p = pos, n = neg;
    const bool may_except = depth < config_.max_exception_depth;
    while (!n.empty()) {
      if (may_except && !rule.body.empty() &&
          static_cast<double>(n.size()) <= config_.exception_ratio * static_cast<double>(p.size()))
        break;
      auto best = best_literal(p, n);
      if (!best) break;
      rule.body.push_back(*best);
      p = filter(p, *best);
      n = filter(n, *best);
    }
    if (rule.body.empty() && !n.empty()) return {rule, {}};
    if (!n.empty() && may_except) rule.exceptions = fold(n, p, depth + 1, 1);

    Index covered;
    for (auto i : p)
      if (rule.fires(rows_[i])) covered.push_back(i);
    return {std::move(rule), std::move(covered)};
  }

  Index filter(const Index& idx, const Literal& lit) const {
    Index out;
    for (auto i : idx)
      if (lit.holds(rows_[i])) out.push_back(i);
    return out;
  }

  struct Scored {
    Literal literal;
    double gain;
  };

  static double gini(double a, double b) {
    const double t = a + b;
    if (t == 0.0) return 0.0;
    const double pa = a / t, pb = b / t;
    return 1.0 - pa * pa - pb * pb;
  }

  // Chooses the literal with the largest impurity reduction among those that
  // keep at least one positive, drop at least one negative and do not lower
  // the positive share. Ties keep the earliest candidate, i.e. the lowest
  // feature index and then the smallest threshold.
  std::optional<Literal> best_literal(const Index& p, const Index& n) const {
    const double P = static_cast<double>(p.size()), N = static_cast<double>(n.size());
    const double T = P + N;
    const double parent = gini(P, N);
    std::optional<Scored> best;

    auto consider = [&](std::size_t feature, Op op, double value, std::size_t tp,
                        std::size_t fp) {
      if (tp == 0 || fp >= n.size()) return;
      // precision(covered) >= precision(parent)
      if (static_cast<double>(tp) * T < P * static_cast<double>(tp + fp)) return;
      const double c = static_cast<double>(tp + fp);
      const double u = T - c;
      const double fn = P - static_cast<double>(tp), tn = N - static_cast<double>(fp);
      const double weighted =
          (c / T) * gini(static_cast<double>(tp), static_cast<double>(fp)) + (u / T) * gini(fn, tn);
      const double gain = parent - weighted;
      if (!best || gain > best->gain)
        best = Scored{make_literal(schema_, schema_[feature].name, op, value), gain};
    };

    for (std::size_t f = 0; f < schema_.size(); ++f) {
      const auto& feat = schema_[f];
      if (feat.kind == FeatureKind::categorical) {
        std::vector<std::size_t> pos_count(feat.level_count(), 0), neg_count(feat.level_count(), 0);
        for (auto i : p) ++pos_count[static_cast<std::size_t>(rows_[i][f])];
        for (auto i : n) ++neg_count[static_cast<std::size_t>(rows_[i][f])];
        for (std::size_t v = 0; v < feat.level_count(); ++v) {
          if (pos_count[v] + neg_count[v] == 0) continue;
          consider(f, Op::eq, static_cast<double>(v), pos_count[v], neg_count[v]);
          consider(f, Op::neq, static_cast<double>(v), p.size() - pos_count[v],
                   n.size() - neg_count[v]);
        }
        continue;
      }
      for (const auto& cut : thresholds(f, p, n)) {
        consider(f, Op::le, cut.threshold, cut.pos_le, cut.neg_le);
        consider(f, Op::gt, cut.threshold, p.size() - cut.pos_le, n.size() - cut.neg_le);
      }
    }
    if (!best) return std::nullopt;
    return best->literal;
  }

  struct Cut {
    double threshold;
    std::size_t pos_le;
    std::size_t neg_le;
  };

  // Class-boundary cut points on an ordered feature: midpoints between
  // adjacent distinct values (numeric) or the lower level index (ordinal),
  // thinned to k evenly ranked candidates in quantile mode.
  std::vector<Cut> thresholds(std::size_t f, const Index& p, const Index& n) const {
    std::vector<std::pair<double, bool>> values;
    values.reserve(p.size() + n.size());
    for (auto i : p) values.emplace_back(rows_[i][f], true);
    for (auto i : n) values.emplace_back(rows_[i][f], false);
    std::sort(values.begin(), values.end());

    struct Group {
      double value;
      std::size_t pos, neg;
    };
    std::vector<Group> groups;
    for (const auto& [v, positive] : values) {
      if (groups.empty() || groups.back().value != v) groups.push_back({v, 0, 0});
      ++(positive ? groups.back().pos : groups.back().neg);
    }

    const bool ordinal = schema_[f].kind == FeatureKind::ordinal;
    std::vector<Cut> cuts;
    std::size_t pos_le = 0, neg_le = 0;
    for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
      pos_le += groups[g].pos;
      neg_le += groups[g].neg;
      const auto& a = groups[g];
      const auto& b = groups[g + 1];
      const bool a_pure_pos = a.neg == 0, a_pure_neg = a.pos == 0;
      const bool b_pure_pos = b.neg == 0, b_pure_neg = b.pos == 0;
      if ((a_pure_pos && b_pure_pos) || (a_pure_neg && b_pure_neg)) continue;
      const double t = ordinal ? a.value : a.value + (b.value - a.value) / 2.0;
      cuts.push_back({t, pos_le, neg_le});
    }

    const auto k = config_.split_candidates.k;
    if (config_.split_candidates.mode == SplitMode::quantiles && cuts.size() > k) {
      std::vector<Cut> thinned;
      const std::size_t m = cuts.size();
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t at = (j * (m - 1) + (k - 1) / 2) / (k - 1);
        if (thinned.empty() || thinned.back().threshold != cuts[at].threshold)
          thinned.push_back(cuts[at]);
      }
      cuts = std::move(thinned);
    }
    return cuts;
  }

  const Schema& schema_;
  std::vector<std::span<const double>> rows_;
  const LearnerConfig& config_;
  std::string head_;
};

}  // namespace detail

/// Learns rules for the undesired class from labeled rows.
///
/// Degenerate inputs: with no undesired example the set is empty; with no
/// favorable example it holds one unconditional rule.
inline DecisionRuleSet learn_rules(const Dataset& data, std::span<const std::string> labels,
                                   const LearnerConfig& config) {
  config.validate();
  if (labels.size() != data.rows.size())
    throw ConfigError("got " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(data.rows.size()) + " rows");

  DecisionRuleSet q;
  q.undesired = config.undesired_label;
  std::set<std::string> others;
  for (const auto& l : labels)
    if (l != q.undesired) others.insert(l);
  if (!config.favorable_label.empty()) {
    q.favorable = config.favorable_label;
    if (q.favorable == q.undesired) throw ConfigError("favorable and undesired labels coincide");
    for (const auto& l : others)
      if (l != q.favorable) throw ConfigError("unexpected class label '" + l + "'");
  } else if (others.size() > 1) {
    throw ConfigError("more than two class labels; only binary decisions are supported");
  } else {
    q.favorable = others.empty() ? "not_" + q.undesired : *others.begin();
  }

  std::vector<std::size_t> pos, neg;
  std::vector<std::span<const double>> rows;
  rows.reserve(data.rows.size());
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    rows.push_back(data.rows[i].values());
    (labels[i] == q.undesired ? pos : neg).push_back(i);
  }
  if (pos.empty()) return q;

  detail::FoldLearner learner(*data.schema, std::move(rows), config, q.undesired);
  q.rules = learner.learn(pos, neg);
  return q;
}

/// Rules of a rule-based model verbatim, else a surrogate learned from the
/// model's own labels on `data`.
inline DecisionRuleSet extract_logic(BlackBox& model, const Dataset& data,
                                     const LearnerConfig& config) {
  if (const auto* rules = model.rules()) return *rules;
  if (data.empty()) throw EmptyDataset("cannot learn a surrogate from an empty dataset");
  auto labels = model.predict(data.rows);
  if (labels.size() != data.rows.size())
    throw ProtocolError("model returned " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(data.rows.size()) + " rows");
  return learn_rules(data, labels, config);
}

struct FidelityReport {
  double agreement_rate = 0.0;
  // "Positive" is the undesired class.
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_negative = 0;
  std::size_t rows = 0;
  std::size_t rule_count = 0;
  std::size_t literal_count = 0;
};

inline FidelityReport fidelity(std::span<const std::string> model_labels,
                               const DecisionRuleSet& rules, const Dataset& data) {
  if (data.empty()) throw EmptyDataset("fidelity needs at least one row");
  FidelityReport r;
  r.rows = data.rows.size();
  r.rule_count = rules.rules.size();
  r.literal_count = rules.literal_count();
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const bool model_undesired = model_labels[i] == rules.undesired;
    const bool rules_undesired = rules.compliant(data.rows[i].values());
    if (model_undesired && rules_undesired) ++r.true_positive;
    else if (!model_undesired && rules_undesired) ++r.false_positive;
    else if (!model_undesired) ++r.true_negative;
    else ++r.false_negative;
  }
  r.agreement_rate = static_cast<double>(r.true_positive + r.true_negative) /
                     static_cast<double>(r.rows);
  return r;
}

inline FidelityReport fidelity(BlackBox& model, const DecisionRuleSet& rules,
                               const Dataset& data) {
  if (data.empty()) throw EmptyDataset("fidelity needs at least one row");
  auto labels = model.predict(data.rows);
  return fidelity(labels, rules, data);
}

inline nlohmann::ordered_json to_json(const FidelityReport& r) {
  nlohmann::ordered_json j;
  j["agreement_rate"] = r.agreement_rate;
  j["rows"] = r.rows;
  j["confusion"] = {{"true_positive", r.true_positive},
                    {"false_positive", r.false_positive},
                    {"true_negative", r.true_negative},
                    {"false_negative", r.false_negative}};
  j["rule_count"] = r.rule_count;
  j["literal_count"] = r.literal_count;
  return j;
}

}  // namespace mc3g

#endif  // MC3G_LEARNER_HPP
