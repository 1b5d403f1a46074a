#ifndef MC3G_CAUSAL_HPP
#define MC3G_CAUSAL_HPP

#include <algorithm>
#include <cstddef>
#include <functional>
#include <istream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mc3g/error.hpp"
#include "mc3g/rules.hpp"
#include "mc3g/schema.hpp"

namespace mc3g {

/// `antecedent => consequent`: whenever every antecedent literal holds, the
/// consequent must hold too.
struct CausalRule {
  std::vector<Literal> antecedent;
  Literal consequent;

  bool triggered(std::span<const double> s) const { return all_hold(antecedent, s); }
  bool satisfied(std::span<const double> s) const {
    return !triggered(s) || consequent.holds(s);
  }

  friend bool operator==(const CausalRule&, const CausalRule&) = default;
};

/// The causal constraints C together with a topological order of the
/// features in the graph antecedent-feature -> consequent-feature.
class CausalRuleSet {
 public:
  CausalRuleSet() = default;

  CausalRuleSet(const Schema& schema, std::vector<CausalRule> rules)
      : feature_count_(schema.size()), names_(schema.names()), rules_(std::move(rules)) {
    rebuild();
  }

  void add(CausalRule rule) {
    rules_.push_back(std::move(rule));
    try {
      rebuild();
    } catch (...) {
      rules_.pop_back();
      rebuild();
      throw;
    }
  }

  bool empty() const { return rules_.empty(); }
  std::size_t size() const { return rules_.size(); }
  const std::vector<CausalRule>& rules() const { return rules_; }

  // Every feature of the schema, causes before effects; ties by index.
  const std::vector<std::size_t>& topological_order() const { return order_; }

  // Rule indices sorted by the topological position of their consequent.
  const std::vector<std::size_t>& evaluation_order() const { return rule_order_; }

  bool consistent(std::span<const double> s) const {
    return std::all_of(rules_.begin(), rules_.end(),
                       [&](const CausalRule& r) { return r.satisfied(s); });
  }

  bool covers(const Schema& schema) const {
    if (rules_.empty()) return true;
    return names_ == schema.names();
  }

 private:
  void rebuild() {
    const std::size_t n = feature_count_;
    std::vector<std::vector<std::size_t>> out(n);
    for (const auto& r : rules_) {
      const auto to = r.consequent.index;
      if (to >= n) throw UnknownFeature(r.consequent.feature);
      for (const auto& a : r.antecedent) {
        if (a.index >= n) throw UnknownFeature(a.feature);
        if (a.index == to)
          throw CyclicCausalGraph("causal rule on '" + r.consequent.feature +
                                  "' uses it in its own antecedent");
        out[a.index].push_back(to);
      }
    }
    for (auto& edges : out) {
      std::sort(edges.begin(), edges.end());
      edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    }
    check_acyclic(out);

    std::vector<std::size_t> indegree(n, 0);
    for (const auto& edges : out)
      for (auto to : edges) ++indegree[to];
    order_.clear();
    std::vector<bool> done(n, false);
    // Kahn's algorithm, always taking the lowest ready index.
    for (std::size_t step = 0; step < n; ++step) {
      std::size_t next = n;
      for (std::size_t i = 0; i < n; ++i)
        if (!done[i] && indegree[i] == 0) {
          next = i;
          break;
        }
      done[next] = true;
      order_.push_back(next);
      for (auto to : out[next]) --indegree[to];
    }

    std::vector<std::size_t> position(n);
    for (std::size_t i = 0; i < n; ++i) position[order_[i]] = i;
    rule_order_.resize(rules_.size());
    for (std::size_t i = 0; i < rules_.size(); ++i) rule_order_[i] = i;
    std::stable_sort(rule_order_.begin(), rule_order_.end(), [&](std::size_t a, std::size_t b) {
      return position[rules_[a].consequent.index] < position[rules_[b].consequent.index];
    });
  }

  void check_acyclic(const std::vector<std::vector<std::size_t>>& out) const {
    enum : char { white, grey, black };
    std::vector<char> colour(out.size(), white);
    std::vector<std::size_t> stack;
    std::function<void(std::size_t)> visit = [&](std::size_t v) {
      colour[v] = grey;
      stack.push_back(v);
      for (auto to : out[v]) {
        if (colour[to] == grey) {
          auto it = std::find(stack.begin(), stack.end(), to);
          std::string cycle;
          for (; it != stack.end(); ++it) cycle += names_[*it] + " -> ";
          throw CyclicCausalGraph("causal graph has a cycle: " + cycle + names_[to]);
        }
        if (colour[to] == white) visit(to);
      }
      stack.pop_back();
      colour[v] = black;
    };
    for (std::size_t v = 0; v < out.size(); ++v)
      if (colour[v] == white) visit(v);
  }

  std::size_t feature_count_ = 0;
  std::vector<std::string> names_;
  std::vector<CausalRule> rules_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> rule_order_;
};

/// Split of the changed features into user actions and causal effects.
struct ChangeLedger {
  std::vector<std::size_t> direct;
  std::vector<std::size_t> induced;
  Weights adjusted_weights;
};

inline void check_weights(const Weights& w, std::size_t feature_count) {
  if (w.size() != feature_count)
    throw SchemaMismatch("weight vector has " + std::to_string(w.size()) + " entries, schema has " +
                         std::to_string(feature_count));
  for (double x : w)
    if (!(x >= 0.0) || !std::isfinite(x)) throw NegativeWeight("feature weights must be >= 0");
}

// Induced-change labeling without precondition checks; used on the hot path.
//
// A changed feature f is induced when some rule concluding on f is
// triggered in `s`, its consequent holds in `s` but not in `s0`, and one of
// its antecedent features changed as well. Everything else that changed is
// direct.
inline ChangeLedger label_changes(std::span<const double> s0, std::span<const double> s,
                                  const CausalRuleSet& c, const Weights& w) {
  const std::size_t n = s.size();
  std::vector<char> changed(n, 0), induced(n, 0);
  for (std::size_t i = 0; i < n; ++i) changed[i] = s0[i] != s[i];

  for (const auto& rule : c.rules()) {
    const auto f = rule.consequent.index;
    if (!changed[f] || induced[f]) continue;
    if (!rule.triggered(s) || !rule.consequent.holds(s) || rule.consequent.holds(s0)) continue;
    if (std::any_of(rule.antecedent.begin(), rule.antecedent.end(),
                    [&](const Literal& l) { return changed[l.index] != 0; }))
      induced[f] = 1;
  }

  ChangeLedger ledger;
  ledger.adjusted_weights = w;
  for (std::size_t i = 0; i < n; ++i) {
    if (!changed[i]) continue;
    if (induced[i]) {
      ledger.induced.push_back(i);
      ledger.adjusted_weights[i] = 0.0;
    } else {
      ledger.direct.push_back(i);
    }
  }
  return ledger;
}

inline void check_causal_schema(const CausalRuleSet& c, const Schema& schema) {
  for (const auto& r : c.rules()) {
    for (const auto& l : r.antecedent) resolve_index(l, schema);
    resolve_index(r.consequent, schema);
  }
  if (!c.covers(schema)) throw SchemaMismatch("causal rules were built for another schema");
}

inline bool is_causally_consistent(const State& s, const CausalRuleSet& c) {
  check_causal_schema(c, s.schema());
  return c.consistent(s.values());
}

inline ChangeLedger classify_changes(const State& s0, const State& s, const CausalRuleSet& c,
                                     const Weights& w) {
  require_same_schema(s0, s);
  check_causal_schema(c, s.schema());
  check_weights(w, s.size());
  if (!c.consistent(s.values()))
    throw CausallyInconsistentInput("state " + s.to_string() + " violates a causal rule");
  return label_changes(s0.values(), s.values(), c, w);
}

struct CounterfactualCheck {
  bool valid = false;
  ChangeLedger ledger;
  const Weights& adjusted_weights() const { return ledger.adjusted_weights; }
};

// Weights first, validity second; a direct change to a non-actionable
// feature invalidates the candidate.
inline CounterfactualCheck check_counterfactual(const Schema& schema, std::span<const double> s0,
                                                std::span<const double> s,
                                                const CausalRuleSet& c, const DecisionRuleSet& q,
                                                const Weights& w) {
  CounterfactualCheck out;
  out.ledger = label_changes(s0, s, c, w);
  out.valid = c.consistent(s) && !q.compliant(s);
  if (out.valid)
    for (auto i : out.ledger.direct)
      if (!schema[i].actionable) {
        out.valid = false;
        break;
      }
  return out;
}

/// Is `s` a valid counterfactual for the adverse state `s0`?
inline CounterfactualCheck is_counterfactual(const State& s0, const State& s,
                                             const CausalRuleSet& c, const DecisionRuleSet& q,
                                             const Weights& w) {
  require_same_schema(s0, s);
  check_causal_schema(c, s.schema());
  for (const auto& r : q.rules) detail::check_rule_against(r, s.schema());
  check_weights(w, s.size());
  return check_counterfactual(s.schema(), s0.values(), s.values(), c, q, w);
}

// ---------------------------------------------------------------------------
// JSON form: [{"if": [{"feature","op","value"}...], "then": {...}}, ...]

namespace detail {

inline Literal literal_from_json(const nlohmann::json& j, const Schema& schema) {
  if (!j.is_object()) throw ParseError("causal literal is not an object");
  const auto name = j.at("feature").get<std::string>();
  const auto op_text = j.at("op").get<std::string>();
  auto op = parse_op(op_text);
  if (!op) throw ParseError("unknown operator '" + op_text + "' on '" + name + "'");
  const auto& f = schema[schema.require(name)];
  auto value_of = [&](const nlohmann::json& v) -> double {
    if (f.kind == FeatureKind::numeric) {
      if (!v.is_number()) throw ParseError("value for '" + name + "' must be a number");
      return v.get<double>();
    }
    std::string text = v.is_string() ? v.get<std::string>()
                       : v.is_number() ? format_number(v.get<double>())
                                       : throw ParseError("bad value for '" + name + "'");
    auto idx = f.level_index(text);
    if (!idx) throw DomainViolation("'" + text + "' is not a level of '" + name + "'");
    return *idx;
  };
  const auto& v = j.at("value");
  if (*op == Op::in) {
    if (!v.is_array() || v.size() != 2) throw ParseError("'in' on '" + name + "' needs [lo, hi]");
    return make_literal(schema, name, *op, value_of(v[0]), value_of(v[1]));
  }
  return make_literal(schema, name, *op, value_of(v));
}

inline nlohmann::ordered_json literal_to_json(const Literal& l, const Schema& schema) {
  const auto& f = schema[l.index];
  auto value = [&](double x) -> nlohmann::ordered_json {
    if (f.kind == FeatureKind::numeric) return x;
    return f.format(x);
  };
  nlohmann::ordered_json j;
  j["feature"] = l.feature;
  j["op"] = std::string(to_symbol(l.op));
  if (l.op == Op::in)
    j["value"] = nlohmann::ordered_json::array({value(l.value), value(l.upper)});
  else
    j["value"] = value(l.value);
  return j;
}

}  // namespace detail

inline CausalRuleSet parse_causal_rules(const nlohmann::json& doc, const Schema& schema) {
  if (!doc.is_array()) throw ParseError("causal rule file must be a JSON list");
  std::vector<CausalRule> rules;
  try {
    for (const auto& item : doc) {
      CausalRule r;
      const auto& ante = item.at("if");
      if (!ante.is_array()) throw ParseError("'if' must be a list of literals");
      for (const auto& l : ante) r.antecedent.push_back(detail::literal_from_json(l, schema));
      r.consequent = detail::literal_from_json(item.at("then"), schema);
      rules.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("causal rules: ") + e.what());
  }
  return CausalRuleSet(schema, std::move(rules));
}

inline CausalRuleSet parse_causal_rules(std::istream& in, const Schema& schema) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("causal rules: ") + e.what());
  }
  return parse_causal_rules(doc, schema);
}

inline nlohmann::ordered_json causal_rules_to_json(const CausalRuleSet& c, const Schema& schema) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& r : c.rules()) {
    nlohmann::ordered_json item;
    item["if"] = nlohmann::ordered_json::array();
    for (const auto& l : r.antecedent) item["if"].push_back(detail::literal_to_json(l, schema));
    item["then"] = detail::literal_to_json(r.consequent, schema);
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace mc3g

#endif  // MC3G_CAUSAL_HPP
