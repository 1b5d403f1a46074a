#ifndef MC3G_SCHEMA_HPP
#define MC3G_SCHEMA_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mc3g/error.hpp"

namespace mc3g {

enum class FeatureKind { numeric, categorical, ordinal };

inline std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::numeric:
      return "numeric";
    case FeatureKind::categorical:
      return "categorical";
    case FeatureKind::ordinal:
      return "ordinal";
  }
  return "?";
}

inline FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "numeric") return FeatureKind::numeric;
  if (text == "categorical") return FeatureKind::categorical;
  if (text == "ordinal") return FeatureKind::ordinal;
  throw ParseError("unknown feature kind '" + std::string(text) + "'");
}

// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

inline std::optional<double> parse_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

/// One column of the feature space.
///
/// Every value is held as a double: numeric features store the value
/// itself, ordinal and categorical features store the index of the level in
/// `levels`. Ordinal deltas are therefore index distances.
struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::string> levels;
  bool actionable = true;
  double weight = 1.0;
  // As declared; absent means "derive it".
  std::optional<double> norm_range;
  // Observed max - min over a dataset; used when norm_range is absent.
  std::optional<double> observed_range;
  // Divisor applied to numeric/ordinal differences by the cost functions.
  double scale = 1.0;

  bool is_discrete() const { return kind != FeatureKind::numeric; }

  std::size_t level_count() const { return levels.size(); }

  bool contains(double v) const {
    if (!std::isfinite(v)) return false;
    if (kind == FeatureKind::numeric) return v >= lo && v <= hi;
    return v >= 0 && v < static_cast<double>(levels.size()) &&
           v == std::floor(v);
  }

  std::optional<double> level_index(std::string_view level) const {
    auto it = std::find(levels.begin(), levels.end(), level);
    if (it == levels.end()) return std::nullopt;
    return static_cast<double>(it - levels.begin());
  }

  std::string format(double v) const {
    if (kind == FeatureKind::numeric) return format_number(v);
    auto i = static_cast<std::size_t>(v);
    return i < levels.size() ? levels[i] : format_number(v);
  }

  // Parses a cell or literal value; nullopt when it is not a member.
  std::optional<double> parse(std::string_view text) const {
    if (kind == FeatureKind::numeric) {
      auto v = parse_number(text);
      if (v && contains(*v)) return v;
      return std::nullopt;
    }
    return level_index(text);
  }
};

class Schema {
 public:
  Schema() = default;

  explicit Schema(std::vector<Feature> features) : features_(std::move(features)) {
    for (std::size_t i = 0; i < features_.size(); ++i) {
      auto& f = features_[i];
      if (f.name.empty()) throw ConfigError("feature " + std::to_string(i) + " has no name");
      if (!index_.emplace(f.name, i).second)
        throw ConfigError("duplicate feature name '" + f.name + "'");
      if (!(f.weight >= 0.0) || !std::isfinite(f.weight))
        throw NegativeWeight("feature '" + f.name + "' has a negative weight");
      if (f.kind == FeatureKind::numeric) {
        if (!std::isfinite(f.lo) || !std::isfinite(f.hi) || !(f.lo < f.hi))
          throw ConfigError("feature '" + f.name + "': numeric domain needs lo < hi");
        f.levels.clear();
      } else {
        if (f.levels.empty())
          throw ConfigError("feature '" + f.name + "': empty level list");
        std::set<std::string> seen(f.levels.begin(), f.levels.end());
        if (seen.size() != f.levels.size())
          throw ConfigError("feature '" + f.name + "': duplicate level");
      }
      if (f.norm_range) {
        if (!(*f.norm_range > 0.0) || !std::isfinite(*f.norm_range))
          throw ConfigError("feature '" + f.name + "': norm_range must be positive");
        f.scale = *f.norm_range;
      } else if (f.kind == FeatureKind::numeric && f.observed_range &&
                 *f.observed_range > 0.0 && std::isfinite(*f.observed_range)) {
        f.scale = *f.observed_range;
      } else if (f.kind == FeatureKind::numeric) {
        f.scale = f.hi - f.lo;
      } else {
        f.scale = 1.0;
      }
    }
  }

  std::size_t size() const { return features_.size(); }
  const Feature& operator[](std::size_t i) const { return features_[i]; }
  const std::vector<Feature>& features() const { return features_; }

  std::optional<std::size_t> index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t require(std::string_view name) const {
    auto i = index_of(name);
    if (!i) throw UnknownFeature(std::string(name));
    return *i;
  }

  std::vector<double> weights() const {
    std::vector<double> w;
    w.reserve(features_.size());
    for (const auto& f : features_) w.push_back(f.weight);
    return w;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(features_.size());
    for (const auto& f : features_) out.push_back(f.name);
    return out;
  }

  // Structural agreement: same names, kinds and domains in the same order.
  bool compatible_with(const Schema& other) const {
    if (size() != other.size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      const auto& a = features_[i];
      const auto& b = other.features_[i];
      if (a.name != b.name || a.kind != b.kind || a.levels != b.levels) return false;
      if (a.kind == FeatureKind::numeric && (a.lo != b.lo || a.hi != b.hi)) return false;
    }
    return true;
  }

 private:
  std::vector<Feature> features_;
  std::unordered_map<std::string, std::size_t> index_;
};

using SchemaPtr = std::shared_ptr<const Schema>;

inline SchemaPtr make_schema(std::vector<Feature> features) {
  return std::make_shared<const Schema>(std::move(features));
}

using Weights = std::vector<double>;

/// A total assignment of values to the features of a schema.
class State {
 public:
  State() = default;

  State(SchemaPtr schema, std::vector<double> values)
      : schema_(std::move(schema)), values_(std::move(values)) {
    if (!schema_) throw SchemaMismatch("state without schema");
    if (values_.size() != schema_->size())
      throw SchemaMismatch("state has " + std::to_string(values_.size()) +
                           " values, schema has " + std::to_string(schema_->size()));
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const auto& f = (*schema_)[i];
      if (!f.contains(values_[i]))
        throw DomainViolation("value " + format_number(values_[i]) +
                              " outside the domain of '" + f.name + "'");
    }
  }

  static State from_text(SchemaPtr schema, std::span<const std::string> cells) {
    if (!schema) throw SchemaMismatch("state without schema");
    if (cells.size() != schema->size())
      throw SchemaMismatch("expected " + std::to_string(schema->size()) + " values, got " +
                           std::to_string(cells.size()));
    std::vector<double> values(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto v = (*schema)[i].parse(cells[i]);
      if (!v)
        throw DomainViolation("'" + cells[i] + "' is not in the domain of '" +
                              (*schema)[i].name + "'");
      values[i] = *v;
    }
    return State(std::move(schema), std::move(values));
  }

  const Schema& schema() const { return *schema_; }
  const SchemaPtr& schema_ptr() const { return schema_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  std::string text(std::size_t i) const { return (*schema_)[i].format(values_[i]); }

  std::string to_string() const {
    std::string out = "(";
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (i) out += ", ";
      out += text(i);
    }
    return out + ")";
  }

  friend bool operator==(const State& a, const State& b) { return a.values_ == b.values_; }

 private:
  SchemaPtr schema_;
  std::vector<double> values_;
};

inline bool same_schema(const State& a, const State& b) {
  return a.schema_ptr() == b.schema_ptr() || a.schema().compatible_with(b.schema());
}

inline void require_same_schema(const State& a, const State& b) {
  if (!same_schema(a, b)) throw SchemaMismatch("states are over different schemas");
}

// Indices of the features whose values differ, ascending.
inline std::vector<std::size_t> changed_features(std::span<const double> a,
                                                 std::span<const double> b) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) out.push_back(i);
  return out;
}

inline std::set<std::string> state_diff(const State& a, const State& b) {
  require_same_schema(a, b);
  std::set<std::string> out;
  for (auto i : changed_features(a.values(), b.values())) out.insert(a.schema()[i].name);
  return out;
}

inline std::vector<std::string> feature_names(const Schema& schema,
                                              std::span<const std::size_t> indices) {
  std::vector<std::string> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(schema[i].name);
  return out;
}

}  // namespace mc3g

#endif  // MC3G_SCHEMA_HPP
