#ifndef MC3G_COST_HPP
#define MC3G_COST_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mc3g/causal.hpp"
#include "mc3g/error.hpp"
#include "mc3g/schema.hpp"

namespace mc3g {

enum class Norm { l0 = 0, l1 = 1, l2 = 2 };

inline std::string_view to_string(Norm p) {
  switch (p) {
    case Norm::l0:
      return "l0";
    case Norm::l1:
      return "l1";
    case Norm::l2:
      return "l2";
  }
  return "?";
}

inline Norm parse_norm(std::string_view text) {
  if (text == "l0" || text == "L0" || text == "0") return Norm::l0;
  if (text == "l1" || text == "L1" || text == "1") return Norm::l1;
  if (text == "l2" || text == "L2" || text == "2") return Norm::l2;
  throw ConfigError("unknown norm '" + std::string(text) + "' (expected l0, l1 or l2)");
}

// Normalized difference b - a on one feature. Categorical features move by
// 0 or 1; numeric and ordinal ones by raw difference over the feature scale.
inline double feature_delta(const Feature& f, double a, double b) {
  if (f.kind == FeatureKind::categorical) return a == b ? 0.0 : 1.0;
  return (b - a) / f.scale;
}

inline double feature_cost(const Feature& f, double a, double b, double weight, Norm p) {
  if (a == b) return 0.0;
  switch (p) {
    case Norm::l0:
      return weight;
    case Norm::l1:
      return weight * std::abs(feature_delta(f, a, b));
    case Norm::l2: {
      const double d = feature_delta(f, a, b);
      return weight * d * d;
    }
  }
  return 0.0;
}

// Sum of the per-feature costs, accumulated in schema order. L2 is the
// weighted sum of squares with no root taken.
inline double weighted_lp(const Schema& schema, std::span<const double> s,
                          std::span<const double> t, const Weights& w, Norm p) {
  double total = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) total += feature_cost(schema[k], s[k], t[k], w[k], p);
  return total;
}

struct FeatureCost {
  std::string feature;
  double contribution = 0.0;
};

struct CostBreakdown {
  Norm norm = Norm::l1;
  double total = 0.0;
  std::vector<FeatureCost> per_feature;  // schema order
};

inline CostBreakdown compute_weighted_Lp(const State& s, const State& s_prime, const Weights& w,
                                         Norm p) {
  require_same_schema(s, s_prime);
  check_weights(w, s.size());
  CostBreakdown out;
  out.norm = p;
  out.per_feature.reserve(s.size());
  const auto& schema = s.schema();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double c = feature_cost(schema[k], s[k], s_prime[k], w[k], p);
    out.per_feature.push_back({schema[k].name, c});
    out.total += c;
  }
  return out;
}

// Baseline that charges every changed feature its schema weight.
inline CostBreakdown standard_cost(const State& s, const State& s_prime,
                                   const Weights& schema_weights, Norm p) {
  return compute_weighted_Lp(s, s_prime, schema_weights, p);
}

}  // namespace mc3g

#endif  // MC3G_COST_HPP
