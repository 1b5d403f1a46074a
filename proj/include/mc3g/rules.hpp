#ifndef MC3G_RULES_HPP
#define MC3G_RULES_HPP

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <istream>
#include <iterator>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mc3g/error.hpp"
#include "mc3g/schema.hpp"

namespace mc3g {

enum class Op { eq, neq, le, gt, in };

inline std::string_view to_symbol(Op op) {
  switch (op) {
    case Op::eq:
      return "=";
    case Op::neq:
      return "!=";
    case Op::le:
      return "<=";
    case Op::gt:
      return ">";
    case Op::in:
      return "in";
  }
  return "?";
}

inline std::optional<Op> parse_op(std::string_view text) {
  if (text == "=" || text == "==") return Op::eq;
  if (text == "!=") return Op::neq;
  if (text == "<=") return Op::le;
  if (text == ">") return Op::gt;
  if (text == "in") return Op::in;
  return std::nullopt;
}

/// A test `feature OP value` on a single feature.
///
/// `index` is resolved against the schema the literal was built for. For
/// `Op::in` the closed interval is [value, upper].
struct Literal {
  std::string feature;
  std::size_t index = 0;
  Op op = Op::eq;
  double value = 0.0;
  double upper = 0.0;

  bool holds(std::span<const double> s) const {
    const double x = s[index];
    switch (op) {
      case Op::eq:
        return x == value;
      case Op::neq:
        return x != value;
      case Op::le:
        return x <= value;
      case Op::gt:
        return x > value;
      case Op::in:
        return x >= value && x <= upper;
    }
    return false;
  }

  friend bool operator==(const Literal& a, const Literal& b) {
    return a.feature == b.feature && a.op == b.op && a.value == b.value &&
           (a.op != Op::in || a.upper == b.upper);
  }
};

// Builds a literal and checks it against the feature's kind and domain.
inline Literal make_literal(const Schema& schema, std::string_view feature, Op op, double value,
                            double upper = 0.0) {
  Literal lit;
  lit.feature = std::string(feature);
  lit.index = schema.require(feature);
  lit.op = op;
  lit.value = value;
  lit.upper = upper;
  const auto& f = schema[lit.index];
  if (f.kind == FeatureKind::categorical && (op == Op::le || op == Op::gt || op == Op::in))
    throw ConfigError("operator '" + std::string(to_symbol(op)) +
                      "' needs an ordered feature, '" + f.name + "' is categorical");
  if (!std::isfinite(value) || (op == Op::in && !std::isfinite(upper)))
    throw ConfigError("non-finite value in literal on '" + f.name + "'");
  if (f.is_discrete() && (op == Op::eq || op == Op::neq || op == Op::le || op == Op::gt) &&
      !f.contains(value))
    throw DomainViolation("literal value outside the levels of '" + f.name + "'");
  if (op == Op::in) {
    if (!(value <= upper)) throw ConfigError("empty interval on '" + f.name + "'");
    if (!f.contains(value) || !f.contains(upper))
      throw DomainViolation("interval bounds outside the domain of '" + f.name + "'");
  }
  return lit;
}

// Resolves the literal's column in `schema`; throws UnknownFeature if absent.
inline std::size_t resolve_index(const Literal& lit, const Schema& schema) {
  if (lit.index < schema.size() && schema[lit.index].name == lit.feature) return lit.index;
  return schema.require(lit.feature);
}

inline bool literal_holds(const Literal& lit, const State& s) {
  const auto i = resolve_index(lit, s.schema());
  if (i == lit.index) return lit.holds(s.values());
  Literal moved = lit;
  moved.index = i;
  return moved.holds(s.values());
}

inline bool all_hold(std::span<const Literal> body, std::span<const double> s) {
  return std::all_of(body.begin(), body.end(), [&](const Literal& l) { return l.holds(s); });
}

/// A stratified rule: fires when the whole body holds and no exception
/// (abnormality rule) fires.
struct DecisionRule {
  std::string head;
  std::vector<Literal> body;
  std::vector<DecisionRule> exceptions;

  bool fires(std::span<const double> s) const {
    if (!all_hold(body, s)) return false;
    return std::none_of(exceptions.begin(), exceptions.end(),
                        [&](const DecisionRule& e) { return e.fires(s); });
  }

  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& e : exceptions) d = std::max(d, 1 + e.depth());
    return d;
  }

  std::size_t literal_count() const {
    std::size_t n = body.size();
    for (const auto& e : exceptions) n += e.literal_count();
    return n;
  }

  friend bool operator==(const DecisionRule&, const DecisionRule&) = default;
};

inline constexpr std::size_t kDefaultMaxExceptionDepth = 2;

/// Rules for the undesired class; a state gets the undesired label when any
/// rule fires and the favorable label otherwise.
struct DecisionRuleSet {
  std::string undesired = "reject";
  std::string favorable = "approve";
  std::vector<DecisionRule> rules;

  bool empty() const { return rules.empty(); }

  bool compliant(std::span<const double> s) const {
    return std::any_of(rules.begin(), rules.end(),
                       [&](const DecisionRule& r) { return r.fires(s); });
  }

  const std::string& classify(std::span<const double> s) const {
    return compliant(s) ? undesired : favorable;
  }

  std::size_t literal_count() const {
    std::size_t n = 0;
    for (const auto& r : rules) n += r.literal_count();
    return n;
  }

  friend bool operator==(const DecisionRuleSet&, const DecisionRuleSet&) = default;
};

namespace detail {

inline void check_rule_against(const DecisionRule& rule, const Schema& schema) {
  for (const auto& lit : rule.body) resolve_index(lit, schema);
  for (const auto& e : rule.exceptions) check_rule_against(e, schema);
}

inline bool fires_on(const DecisionRule& rule, const State& s) {
  for (const auto& lit : rule.body)
    if (!literal_holds(lit, s)) return false;
  return std::none_of(rule.exceptions.begin(), rule.exceptions.end(),
                      [&](const DecisionRule& e) { return fires_on(e, s); });
}

}  // namespace detail

// Throws UnknownFeature when any literal (exceptions included) names a
// feature that `s`'s schema lacks.
inline bool rule_fires(const DecisionRule& rule, const State& s) {
  detail::check_rule_against(rule, s.schema());
  return detail::fires_on(rule, s);
}

inline bool is_decision_compliant(const State& s, const DecisionRuleSet& q) {
  for (const auto& r : q.rules) detail::check_rule_against(r, s.schema());
  return std::any_of(q.rules.begin(), q.rules.end(),
                     [&](const DecisionRule& r) { return detail::fires_on(r, s); });
}

inline void validate_rules(const DecisionRuleSet& q, std::size_t max_depth) {
  if (q.undesired.empty() || q.favorable.empty() || q.undesired == q.favorable)
    throw ConfigError("rule set needs two distinct class labels");
  for (const auto& r : q.rules) {
    if (r.head != q.undesired)
      throw ConfigError("rule head '" + r.head + "' is not the undesired label '" +
                        q.undesired + "'");
    if (r.depth() > max_depth)
      throw ConfigError("exception nesting depth " + std::to_string(r.depth()) +
                        " exceeds the limit " + std::to_string(max_depth));
  }
}

// ---------------------------------------------------------------------------
// Text format
//
//   @undesired reject
//   @favorable approve
//   reject :- balance <= 59999, credit <= 599 except (debt = no_debt).
//
// Exceptions nest by writing `except (...)` inside the parentheses.
// `feature in [lo, hi]` expresses interval literals; `true` is an empty body.

namespace detail {

inline bool is_bare_value(std::string_view v) {
  if (v.empty() || v == "true" || v == "except" || v == "in") return false;
  if (v.back() == '.' || std::string_view("<>=!").find(v.front()) != std::string_view::npos)
    return false;
  for (char c : v)
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '(' || c == ')' ||
        c == '"' || c == '[' || c == ']' || c == '\\')
      return false;
  return true;
}

inline std::string quote_value(std::string_view v) {
  if (is_bare_value(v)) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::string literal_text(const Literal& lit, const Schema& schema) {
  const auto& f = schema[lit.index];
  if (lit.op == Op::in)
    return lit.feature + " in [" + quote_value(f.format(lit.value)) + ", " +
           quote_value(f.format(lit.upper)) + "]";
  return lit.feature + " " + std::string(to_symbol(lit.op)) + " " +
         quote_value(f.format(lit.value));
}

inline void body_text(std::string& out, const DecisionRule& rule, const Schema& schema) {
  if (rule.body.empty()) out += "true";
  for (std::size_t i = 0; i < rule.body.size(); ++i) {
    if (i) out += ", ";
    out += literal_text(rule.body[i], schema);
  }
  for (const auto& e : rule.exceptions) {
    out += " except (";
    body_text(out, e, schema);
    out += ")";
  }
}

class RuleParser {
 public:
  RuleParser(std::string_view line, std::size_t line_no, const Schema& schema)
      : text_(line), line_(line_no), schema_(schema) {}

  DecisionRule parse_rule() {
    DecisionRule rule;
    rule.head = identifier("rule head");
    skip_space();
    if (!consume(":-")) fail("expected ':-' after rule head");
    parse_body(rule);
    skip_space();
    consume(".");
    skip_space();
    if (pos_ != text_.size()) fail("unexpected text after rule");
    return rule;
  }

  std::string_view rest() {
    skip_space();
    return text_.substr(pos_);
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, pos_ + 1); }

  std::string identifier(const char* what) {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '_' || text_[pos_] == '-'))
      ++pos_;
    if (start == pos_) fail(std::string("expected ") + what);
    return std::string(text_.substr(start, pos_ - start));
  }

 private:
  void parse_body(DecisionRule& rule) {
    skip_space();
    if (peek_word("true")) {
      pos_ += 4;
    } else {
      rule.body.push_back(parse_literal());
      for (;;) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ',') {
          ++pos_;
          rule.body.push_back(parse_literal());
        } else {
          break;
        }
      }
    }
    for (;;) {
      skip_space();
      if (!peek_word("except")) break;
      pos_ += 6;
      skip_space();
      if (!consume("(")) fail("expected '(' after except");
      DecisionRule ex;
      ex.head = rule.head;
      parse_body(ex);
      skip_space();
      if (!consume(")")) fail("expected ')' closing except");
      rule.exceptions.push_back(std::move(ex));
    }
  }

  Literal parse_literal() {
    skip_space();
    const std::size_t at = pos_;
    std::string feature = identifier("feature name");
    auto index = schema_.index_of(feature);
    if (!index) {
      pos_ = at;
      fail("unknown feature '" + feature + "'");
    }
    const auto& f = schema_[*index];
    skip_space();
    const std::size_t op_at = pos_;
    Op op;
    if (consume("!=")) op = Op::neq;
    else if (consume("<=")) op = Op::le;
    else if (consume("==") || consume("=")) op = Op::eq;
    else if (consume(">")) op = Op::gt;
    else if (peek_word("in")) {
      pos_ += 2;
      op = Op::in;
    } else {
      fail("expected one of =, !=, <=, >, in");
    }
    if (op == Op::in) {
      skip_space();
      if (!consume("[")) fail("expected '[' after in");
      double lo = value_of(f);
      skip_space();
      if (!consume(",")) fail("expected ',' in interval");
      double hi = value_of(f);
      skip_space();
      if (!consume("]")) fail("expected ']' closing interval");
      return checked(f.name, op, lo, hi, op_at);
    }
    double v = value_of(f);
    return checked(f.name, op, v, 0.0, op_at);
  }

  Literal checked(const std::string& feature, Op op, double v, double hi, std::size_t at) {
    try {
      return make_literal(schema_, feature, op, v, hi);
    } catch (const ConfigError& e) {
      pos_ = at;
      fail(e.what());
    }
  }

  double value_of(const Feature& f) {
    skip_space();
    const std::size_t at = pos_;
    std::string token;
    if (pos_ < text_.size() && text_[pos_] == '"') {
      ++pos_;
      bool closed = false;
      while (pos_ < text_.size()) {
        char c = text_[pos_++];
        if (c == '\\' && pos_ < text_.size()) {
          token.push_back(text_[pos_++]);
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          token.push_back(c);
        }
      }
      if (!closed) fail("unterminated quoted value");
    } else {
      while (pos_ < text_.size()) {
        char c = text_[pos_];
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == ')' || c == ']' ||
            c == '(')
          break;
        token.push_back(c);
        ++pos_;
      }
      // A trailing '.' terminates the rule unless it belongs to a number.
      if (!token.empty() && token.back() == '.' && !f.level_index(token)) {
        token.pop_back();
        --pos_;
      }
    }
    if (token.empty()) fail("expected a value for '" + f.name + "'");
    if (f.kind == FeatureKind::numeric) {
      auto v = parse_number(token);
      if (!v) {
        pos_ = at;
        fail("'" + token + "' is not a number");
      }
      return *v;
    }
    auto v = f.level_index(token);
    if (!v) {
      pos_ = at;
      fail("'" + token + "' is not a level of '" + f.name + "'");
    }
    return *v;
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(std::string_view token) {
    if (text_.substr(pos_, token.size()) != token) return false;
    pos_ += token.size();
    return true;
  }

  bool peek_word(std::string_view word) const {
    if (text_.substr(pos_, word.size()) != word) return false;
    std::size_t after = pos_ + word.size();
    return after == text_.size() ||
           !(std::isalnum(static_cast<unsigned char>(text_[after])) || text_[after] == '_');
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_;
  const Schema& schema_;
};

}  // namespace detail

inline std::string serialize_rules(const DecisionRuleSet& q, const Schema& schema) {
  std::string out = "@undesired " + q.undesired + "\n@favorable " + q.favorable + "\n";
  for (const auto& r : q.rules) {
    out += r.head + " :- ";
    detail::body_text(out, r, schema);
    out += ".\n";
  }
  return out;
}

inline DecisionRuleSet parse_rules(std::string_view text, const Schema& schema,
                                   std::size_t max_depth = kDefaultMaxExceptionDepth) {
  DecisionRuleSet q;
  std::optional<std::string> undesired, favorable;
  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '%' || line[first] == '#') continue;
    if (line[first] == '@') {
      detail::RuleParser p(std::string_view(line).substr(first + 1), line_no, schema);
      auto key = p.identifier("directive");
      auto value = p.identifier("label");
      if (!p.rest().empty()) p.fail("unexpected text after directive");
      if (key == "undesired") undesired = value;
      else if (key == "favorable") favorable = value;
      else p.fail("unknown directive '@" + key + "'");
      continue;
    }
    detail::RuleParser p(line, line_no, schema);
    auto rule = p.parse_rule();
    if (!undesired) undesired = rule.head;
    if (rule.head != *undesired)
      throw ParseError("rule head '" + rule.head + "' differs from undesired label '" +
                           *undesired + "'",
                       line_no, first + 1);
    if (rule.depth() > max_depth)
      throw ParseError("exception nesting deeper than " + std::to_string(max_depth), line_no,
                       first + 1);
    q.rules.push_back(std::move(rule));
  }
  if (undesired) q.undesired = *undesired;
  if (favorable) q.favorable = *favorable;
  else if (q.undesired == q.favorable) q.favorable = "not_" + q.undesired;
  validate_rules(q, max_depth);
  return q;
}

inline DecisionRuleSet parse_rules(std::istream& in, const Schema& schema,
                                   std::size_t max_depth = kDefaultMaxExceptionDepth) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_rules(text, schema, max_depth);
}

}  // namespace mc3g

#endif  // MC3G_RULES_HPP
