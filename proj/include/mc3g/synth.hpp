#ifndef MC3G_SYNTH_HPP
#define MC3G_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mc3g/causal.hpp"
#include "mc3g/dataset.hpp"
#include "mc3g/rules.hpp"
#include "mc3g/schema.hpp"

// Fixture worlds with declared causal graphs and ground-truth decision rules.
// Numeric features in generated worlds take integer values only.

namespace mc3g::synth {

struct World {
  std::string name;
  Dataset data;  // labels come from `rules`
  CausalRuleSet causal;
  DecisionRuleSet rules;
  // Suggested numeric grid steps for rule-grid candidates.
  std::map<std::string, double> grid_step;
};

using Rng = std::mt19937_64;

inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) { return n ? rng() % n : 0; }

inline double uniform_int(Rng& rng, double lo, double hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<double>(uniform_index(rng, span));
}

inline Feature numeric(std::string name, double lo, double hi, bool actionable = true,
                       double weight = 1.0) {
  Feature f;
  f.name = std::move(name);
  f.kind = FeatureKind::numeric;
  f.lo = lo;
  f.hi = hi;
  f.actionable = actionable;
  f.weight = weight;
  return f;
}

inline Feature levels(std::string name, FeatureKind kind, std::vector<std::string> values,
                      bool actionable = true, double weight = 1.0) {
  Feature f;
  f.name = std::move(name);
  f.kind = kind;
  f.levels = std::move(values);
  f.actionable = actionable;
  f.weight = weight;
  return f;
}

inline double random_value(Rng& rng, const Feature& f) {
  if (f.kind == FeatureKind::numeric) return uniform_int(rng, std::ceil(f.lo), std::floor(f.hi));
  return static_cast<double>(uniform_index(rng, f.level_count()));
}

// A random integer value on which `lit` holds; nullopt if none exists.
inline std::optional<double> satisfying_value(Rng& rng, const Feature& f, const Literal& lit) {
  const double lo = f.kind == FeatureKind::numeric ? std::ceil(f.lo) : 0.0;
  const double hi = f.kind == FeatureKind::numeric ? std::floor(f.hi)
                                                   : static_cast<double>(f.level_count() - 1);
  double a = lo, b = hi;
  switch (lit.op) {
    case Op::eq:
      return lit.value;
    case Op::neq: {
      if (lo == hi) return std::nullopt;
      double v = uniform_int(rng, lo, hi - 1);
      return v >= lit.value ? v + 1 : v;
    }
    case Op::le:
      b = std::min(hi, std::floor(lit.value));
      break;
    case Op::gt:
      a = std::max(lo, std::floor(lit.value) + 1);
      break;
    case Op::in:
      a = std::max(lo, std::ceil(lit.value));
      b = std::min(hi, std::floor(lit.upper));
      break;
  }
  if (a > b) return std::nullopt;
  return uniform_int(rng, a, b);
}

// Rewrites consequent features until every causal rule holds.
inline bool repair(Rng& rng, const Schema& schema, const CausalRuleSet& c,
                   std::vector<double>& v) {
  for (int pass = 0; pass < 8; ++pass) {
    if (c.consistent(v)) return true;
    for (auto ri : c.evaluation_order()) {
      const auto& r = c.rules()[ri];
      if (r.satisfied(v)) continue;
      auto x = satisfying_value(rng, schema[r.consequent.index], r.consequent);
      if (!x) return false;
      v[r.consequent.index] = *x;
    }
  }
  return c.consistent(v);
}

inline std::vector<State> sample_rows(Rng& rng, const SchemaPtr& schema, const CausalRuleSet& c,
                                      std::size_t count) {
  std::vector<State> rows;
  rows.reserve(count);
  std::size_t attempts = 0;
  while (rows.size() < count && attempts < count * 50 + 100) {
    ++attempts;
    std::vector<double> v(schema->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = random_value(rng, (*schema)[i]);
    if (!repair(rng, *schema, c, v)) continue;
    rows.emplace_back(schema, std::move(v));
  }
  return rows;
}

inline void label_rows(World& w) {
  normalize_by_rows(w.data);
  std::vector<std::string> labels;
  labels.reserve(w.data.rows.size());
  for (const auto& r : w.data.rows) labels.push_back(w.rules.classify(r.values()));
  w.data.labels = std::move(labels);
}

inline Literal lit(const Schema& s, const std::string& name, Op op, const std::string& value) {
  const auto& f = s[s.require(name)];
  double v = f.kind == FeatureKind::numeric ? *parse_number(value) : *f.level_index(value);
  return make_literal(s, name, op, v);
}

inline DecisionRule rule(const std::string& head, std::vector<Literal> body,
                         std::vector<DecisionRule> exceptions = {}) {
  DecisionRule r;
  r.head = head;
  r.body = std::move(body);
  r.exceptions = std::move(exceptions);
  return r;
}

/// The loan micro-world: debt clearance lifts the credit score.
///
/// Credit score cannot be set directly (non-actionable). Loans are denied
/// while the balance is below 60,000 or the credit score below 600.
inline World loan_world() {
  World w;
  w.name = "loan";
  auto schema = make_schema({
      levels("debt", FeatureKind::ordinal, {"no_debt", "<=10000", ">10000"}),
      numeric("balance", 0, 1000000),
      numeric("credit", 300, 850, /*actionable=*/false),
  });
  const auto& s = *schema;
  w.causal = CausalRuleSet(s, {CausalRule{{lit(s, "debt", Op::eq, "no_debt")},
                                          lit(s, "credit", Op::gt, "599")}});
  w.rules.undesired = "reject";
  w.rules.favorable = "approve";
  w.rules.rules = {rule("reject", {lit(s, "balance", Op::le, "59999")}),
                   rule("reject", {lit(s, "credit", Op::le, "599")})};

  auto row = [&](const char* debt, double balance, double credit) {
    return State(schema, {*s[0].level_index(debt), balance, credit});
  };
  w.data.schema = schema;
  w.data.rows = {
      row(">10000", 40000, 599),   // John
      row("no_debt", 60000, 620),
      row("<=10000", 75000, 640),
      row(">10000", 65000, 610),
      row("no_debt", 90000, 700),
      row("no_debt", 30000, 650),
      row(">10000", 20000, 450),
      row("<=10000", 52000, 580),
  };
  w.grid_step = {{"balance", 1.0}, {"credit", 1.0}};
  label_rows(w);
  return w;
}

/// Census-income style world. Marriage sets the relationship role and
/// postgraduate education implies a minimum age.
inline World adult_world(std::uint64_t seed, std::size_t rows) {
  World w;
  w.name = "adult";
  auto schema = make_schema({
      numeric("age", 17, 90, /*actionable=*/false),
      levels("education", FeatureKind::ordinal,
             {"hs", "some_college", "bachelors", "masters", "doctorate"}),
      levels("marital_status", FeatureKind::categorical, {"never_married", "married", "divorced"}),
      levels("relationship", FeatureKind::categorical,
             {"not_in_family", "unmarried", "own_child", "spouse"}),
      levels("occupation", FeatureKind::categorical,
             {"service", "clerical", "craft", "professional", "managerial"}),
      numeric("hours_per_week", 1, 99),
      numeric("capital_gain", 0, 20000),
      levels("sex", FeatureKind::categorical, {"female", "male"}, /*actionable=*/false),
  });
  const auto& s = *schema;
  w.causal = CausalRuleSet(
      s, {
             CausalRule{{lit(s, "marital_status", Op::eq, "married")},
                        lit(s, "relationship", Op::eq, "spouse")},
             CausalRule{{lit(s, "marital_status", Op::neq, "married")},
                        lit(s, "relationship", Op::neq, "spouse")},
             CausalRule{{lit(s, "education", Op::gt, "bachelors")}, lit(s, "age", Op::gt, "22")},
             CausalRule{{lit(s, "occupation", Op::eq, "professional")},
                        lit(s, "education", Op::gt, "hs")},
         });
  w.rules.undesired = "le_50k";
  w.rules.favorable = "gt_50k";
  w.rules.rules = {
      rule("le_50k", {lit(s, "relationship", Op::neq, "spouse"),
                      lit(s, "education", Op::le, "some_college")}),
      rule("le_50k", {lit(s, "hours_per_week", Op::le, "35"),
                      lit(s, "capital_gain", Op::le, "5000")}),
      rule("le_50k", {lit(s, "occupation", Op::eq, "service")},
           {rule("le_50k", {lit(s, "education", Op::gt, "bachelors")})}),
  };
  Rng rng(seed);
  w.data.schema = schema;
  w.data.rows = sample_rows(rng, schema, w.causal, rows);
  w.grid_step = {{"age", 1.0}, {"hours_per_week", 1.0}, {"capital_gain", 100.0}};
  label_rows(w);
  return w;
}

/// Credit-scoring style world. Longer employment builds savings, large
/// savings keep the checking account positive, owning a home implies age.
inline World german_world(std::uint64_t seed, std::size_t rows) {
  World w;
  w.name = "german";
  auto schema = make_schema({
      levels("checking_status", FeatureKind::ordinal, {"lt_0", "0_to_200", "ge_200", "none"}),
      numeric("duration", 4, 72),
      levels("credit_history", FeatureKind::categorical,
             {"critical", "delayed", "paid", "all_paid"}),
      numeric("credit_amount", 250, 20000),
      levels("savings", FeatureKind::ordinal, {"lt_100", "100_to_500", "500_to_1000", "ge_1000"}),
      levels("employment", FeatureKind::ordinal, {"unemployed", "lt_1", "1_to_4", "4_to_7", "ge_7"}),
      numeric("age", 19, 75, /*actionable=*/false),
      levels("housing", FeatureKind::categorical, {"rent", "own", "free"}),
  });
  const auto& s = *schema;
  w.causal = CausalRuleSet(
      s, {
             CausalRule{{lit(s, "employment", Op::gt, "lt_1")}, lit(s, "savings", Op::gt, "lt_100")},
             CausalRule{{lit(s, "savings", Op::gt, "500_to_1000")},
                        lit(s, "checking_status", Op::gt, "lt_0")},
             CausalRule{{lit(s, "housing", Op::eq, "own")}, lit(s, "age", Op::gt, "25")},
         });
  w.rules.undesired = "bad";
  w.rules.favorable = "good";
  w.rules.rules = {
      rule("bad", {lit(s, "checking_status", Op::le, "0_to_200"),
                   lit(s, "savings", Op::le, "lt_100")}),
      rule("bad", {lit(s, "duration", Op::gt, "36"), lit(s, "credit_amount", Op::gt, "8000")}),
      rule("bad", {lit(s, "credit_history", Op::eq, "critical"),
                   lit(s, "employment", Op::le, "lt_1")}),
  };
  Rng rng(seed);
  w.data.schema = schema;
  w.data.rows = sample_rows(rng, schema, w.causal, rows);
  w.grid_step = {{"duration", 1.0}, {"age", 1.0}, {"credit_amount", 50.0}};
  label_rows(w);
  return w;
}

/// Car-evaluation style world with no causal dependencies. The dataset is
/// the full 1,728-state enumeration.
inline World cars_world() {
  World w;
  w.name = "cars";
  const std::vector<std::string> price{"vhigh", "high", "med", "low"};
  auto schema = make_schema({
      levels("buying", FeatureKind::ordinal, price),
      levels("maint", FeatureKind::ordinal, price),
      levels("doors", FeatureKind::ordinal, {"2", "3", "4", "5more"}),
      levels("persons", FeatureKind::ordinal, {"2", "4", "more"}),
      levels("lug_boot", FeatureKind::ordinal, {"small", "med", "big"}),
      levels("safety", FeatureKind::ordinal, {"low", "med", "high"}),
  });
  const auto& s = *schema;
  w.causal = CausalRuleSet(s, {});
  w.rules.undesired = "unacc";
  w.rules.favorable = "acc";
  w.rules.rules = {
      rule("unacc", {lit(s, "safety", Op::eq, "low")}),
      rule("unacc", {lit(s, "persons", Op::eq, "2")}),
      rule("unacc", {lit(s, "buying", Op::eq, "vhigh"), lit(s, "maint", Op::le, "high")}),
      rule("unacc", {lit(s, "lug_boot", Op::eq, "small"), lit(s, "safety", Op::eq, "med")}),
  };
  w.data.schema = schema;
  std::vector<double> v(s.size(), 0.0);
  for (;;) {
    w.data.rows.emplace_back(schema, v);
    std::size_t f = s.size();
    while (f-- > 0) {
      if (++v[f] < static_cast<double>(s[f].level_count())) break;
      v[f] = 0;
    }
    if (f == static_cast<std::size_t>(-1)) break;
  }
  label_rows(w);
  return w;
}

struct RandomWorldOptions {
  std::size_t min_features = 4;
  std::size_t max_features = 8;
  // Upper bound on the number of distinct states.
  double max_states = 1e4;
  std::size_t rows = 40;
  std::size_t max_causal_rules = 3;
  std::size_t max_decision_rules = 3;
};

inline double state_count(const Schema& s) {
  double n = 1.0;
  for (const auto& f : s.features())
    n *= f.kind == FeatureKind::numeric ? (std::floor(f.hi) - std::ceil(f.lo) + 1)
                                        : static_cast<double>(f.level_count());
  return n;
}

inline Literal random_literal(Rng& rng, const Schema& s, std::size_t i) {
  const auto& f = s[i];
  if (f.kind == FeatureKind::categorical) {
    double v = static_cast<double>(uniform_index(rng, f.level_count()));
    return make_literal(s, f.name, uniform_index(rng, 3) == 0 ? Op::neq : Op::eq, v);
  }
  const double lo = f.kind == FeatureKind::numeric ? f.lo : 0.0;
  const double hi = f.kind == FeatureKind::numeric ? f.hi : static_cast<double>(f.level_count() - 1);
  switch (uniform_index(rng, 5)) {
    case 0:
      return make_literal(s, f.name, Op::eq, uniform_int(rng, lo, hi));
    case 1: {
      double a = uniform_int(rng, lo, hi), b = uniform_int(rng, lo, hi);
      if (a > b) std::swap(a, b);
      return make_literal(s, f.name, Op::in, a, b);
    }
    case 2:
    case 3:
      return make_literal(s, f.name, Op::le, uniform_int(rng, lo, hi - 1));
    default:
      return make_literal(s, f.name, Op::gt, uniform_int(rng, lo, hi - 1));
  }
}

/// A small random world over integer/ordinal/categorical features with a
/// random causal DAG and random stratified decision rules.
inline World random_world(std::uint64_t seed, const RandomWorldOptions& opt = {}) {
  Rng rng(seed);
  World w;
  w.name = "random_" + std::to_string(seed);

  SchemaPtr schema;
  for (;;) {
    const std::size_t n =
        opt.min_features + uniform_index(rng, opt.max_features - opt.min_features + 1);
    std::vector<Feature> features;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string name = "f" + std::to_string(i);
      const bool actionable = uniform_index(rng, 5) != 0;
      const double weight = 0.5 * static_cast<double>(1 + uniform_index(rng, 4));
      switch (uniform_index(rng, 3)) {
        case 0:
          features.push_back(numeric(name, 0, static_cast<double>(2 + uniform_index(rng, 5)),
                                     actionable, weight));
          break;
        case 1: {
          std::vector<std::string> lv;
          for (std::size_t k = 0, m = 2 + uniform_index(rng, 3); k < m; ++k)
            lv.push_back("o" + std::to_string(k));
          features.push_back(levels(name, FeatureKind::ordinal, lv, actionable, weight));
          break;
        }
        default: {
          std::vector<std::string> lv;
          for (std::size_t k = 0, m = 2 + uniform_index(rng, 2); k < m; ++k)
            lv.push_back("c" + std::to_string(k));
          features.push_back(levels(name, FeatureKind::categorical, lv, actionable, weight));
        }
      }
    }
    schema = make_schema(std::move(features));
    if (state_count(*schema) <= opt.max_states) break;
  }
  const auto& s = *schema;
  const std::size_t n = s.size();

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  std::vector<CausalRule> causal;
  std::vector<std::size_t> targets;
  for (std::size_t pos = 1; pos < n; ++pos) targets.push_back(pos);
  for (std::size_t i = targets.size(); i > 1; --i)
    std::swap(targets[i - 1], targets[uniform_index(rng, i)]);
  const std::size_t rule_count = std::min(targets.size(), 1 + uniform_index(rng, opt.max_causal_rules));
  for (std::size_t r = 0; r < rule_count; ++r) {
    const std::size_t pos = targets[r];
    CausalRule cr;
    const std::size_t ante = 1 + uniform_index(rng, std::min<std::size_t>(2, pos));
    std::vector<std::size_t> used;
    while (cr.antecedent.size() < ante) {
      std::size_t from = order[uniform_index(rng, pos)];
      if (std::find(used.begin(), used.end(), from) != used.end()) continue;
      used.push_back(from);
      cr.antecedent.push_back(random_literal(rng, s, from));
    }
    cr.consequent = random_literal(rng, s, order[pos]);
    causal.push_back(std::move(cr));
  }
  w.causal = CausalRuleSet(s, std::move(causal));

  w.rules.undesired = "deny";
  w.rules.favorable = "grant";
  const std::size_t decision_count = 1 + uniform_index(rng, opt.max_decision_rules);
  for (std::size_t r = 0; r < decision_count; ++r) {
    DecisionRule dr;
    dr.head = "deny";
    const std::size_t len = 1 + uniform_index(rng, 2);
    std::vector<std::size_t> used;
    while (dr.body.size() < len) {
      std::size_t f = uniform_index(rng, n);
      if (std::find(used.begin(), used.end(), f) != used.end()) continue;
      used.push_back(f);
      dr.body.push_back(random_literal(rng, s, f));
    }
    if (uniform_index(rng, 10) < 3) {
      DecisionRule ex;
      ex.head = "deny";
      ex.body.push_back(random_literal(rng, s, uniform_index(rng, n)));
      dr.exceptions.push_back(std::move(ex));
    }
    w.rules.rules.push_back(std::move(dr));
  }

  w.data.schema = schema;
  w.data.rows = sample_rows(rng, schema, w.causal, opt.rows);
  for (const auto& f : s.features())
    if (f.kind == FeatureKind::numeric) w.grid_step[f.name] = 1.0;
  label_rows(w);
  return w;
}

// Every state of a world whose numeric features are integer-valued.
inline std::vector<State> enumerate_states(const SchemaPtr& schema) {
  const auto& s = *schema;
  std::vector<std::vector<double>> axes(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& f = s[i];
    if (f.kind == FeatureKind::numeric)
      for (double v = std::ceil(f.lo); v <= f.hi; v += 1.0) axes[i].push_back(v);
    else
      for (std::size_t k = 0; k < f.level_count(); ++k) axes[i].push_back(static_cast<double>(k));
  }
  std::vector<State> out;
  std::vector<std::size_t> at(s.size(), 0);
  for (;;) {
    std::vector<double> v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = axes[i][at[i]];
    out.emplace_back(schema, std::move(v));
    std::size_t i = s.size();
    while (i-- > 0) {
      if (++at[i] < axes[i].size()) break;
      at[i] = 0;
    }
    if (i == static_cast<std::size_t>(-1)) break;
  }
  return out;
}

}  // namespace mc3g::synth

#endif  // MC3G_SYNTH_HPP
