#ifndef MC3G_REPORT_HPP
#define MC3G_REPORT_HPP

#include <cctype>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mc3g/causal.hpp"
#include "mc3g/cost.hpp"
#include "mc3g/csv.hpp"
#include "mc3g/schema.hpp"
#include "mc3g/search.hpp"

namespace mc3g {

inline constexpr const char* kL2Definition =
    "weighted sum of squared normalized differences; no square root is taken";

inline nlohmann::ordered_json state_to_json(const State& s) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& f = s.schema()[i];
    if (f.kind == FeatureKind::numeric)
      j[f.name] = s[i];
    else
      j[f.name] = f.format(s[i]);
  }
  return j;
}

inline nlohmann::ordered_json to_json(const CostBreakdown& c) {
  nlohmann::ordered_json j;
  j["norm"] = std::string(to_string(c.norm));
  j["total"] = c.total;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& fc : c.per_feature) per[fc.feature] = fc.contribution;
  j["per_feature"] = std::move(per);
  return j;
}

namespace detail {

inline std::string change_phrase(const Feature& f, double from, double to) {
  const std::string a = f.format(from), b = f.format(to);
  if (f.kind == FeatureKind::categorical) return "change " + f.name + " from " + a + " to " + b;
  const char* verb = to > from ? "increase " : "decrease ";
  if (f.kind == FeatureKind::ordinal)
    return std::string(to > from ? "raise " : "lower ") + f.name + " from " + a + " to " + b;
  return verb + f.name + " from " + a + " to " + b;
}

}  // namespace detail

/// Plain-language actions derived from a ledger: direct changes first, then
/// the effects that follow from them.
inline std::string recommendation(const State& s0, const State& g, const ChangeLedger& ledger) {
  const auto& schema = s0.schema();
  std::string out;
  for (std::size_t n = 0; n < ledger.direct.size(); ++n) {
    auto i = ledger.direct[n];
    std::string phrase = detail::change_phrase(schema[i], s0[i], g[i]);
    if (n == 0) phrase[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(phrase[0])));
    out += (n ? "; " : "") + phrase;
  }
  if (ledger.direct.empty()) out = "No direct action needed";
  out += ".";
  if (!ledger.induced.empty()) {
    out += " As a consequence: ";
    for (std::size_t n = 0; n < ledger.induced.size(); ++n) {
      auto i = ledger.induced[n];
      out += (n ? "; " : "") + schema[i].name + " moves from " + schema[i].format(s0[i]) + " to " +
             schema[i].format(g[i]) + " automatically";
    }
    out += ".";
  }
  return out;
}

inline nlohmann::ordered_json to_json(const CounterfactualResult& r, const State& s0) {
  const auto& schema = s0.schema();
  nlohmann::ordered_json j;
  j["rank"] = r.rank;
  j["state"] = state_to_json(r.state);
  j["direct"] = feature_names(schema, r.ledger.direct);
  j["induced"] = feature_names(schema, r.ledger.induced);
  nlohmann::ordered_json weights = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < schema.size(); ++i) weights[schema[i].name] = r.ledger.adjusted_weights[i];
  j["adjusted_weights"] = std::move(weights);
  j["cost"] = to_json(r.cost);
  j["recommendation"] = recommendation(s0, r.state, r.ledger);
  return j;
}

// ---------------------------------------------------------------------------
// Benchmark output

inline std::string metric_value(double v) { return format_number(v); }

inline void write_benchmark_csv(std::ostream& out, const BenchmarkReport& report) {
  csv::write_record(out, {"dataset", "mode", "norm", "metric", "value"});
  const std::string kth = "k" + std::to_string(report.k);
  for (const auto& row : report.rows) {
    const std::string mode(to_string(row.mode)), norm(to_string(row.norm));
    auto put = [&](const std::string& metric, const std::string& value) {
      csv::write_record(out, {report.dataset, mode, norm, metric, value});
    };
    put("k1", metric_value(row.nearest));
    put(kth, metric_value(row.kth));
    put("avg", metric_value(row.average));
    put("found", std::to_string(row.found) + "/" + std::to_string(row.instances));
    put("causal_compliance_pct", metric_value(row.compliance_pct));
    put("blackbox_agreement_pct", metric_value(row.blackbox_agreement_pct));
  }
}

inline nlohmann::ordered_json benchmark_to_json(const BenchmarkReport& report,
                                                const Dataset& data) {
  nlohmann::ordered_json j;
  j["dataset"] = report.dataset;
  j["k"] = report.k;
  j["kth_column"] = "cost of the k-th nearest counterfactual (furthest returned if fewer)";
  j["l2_definition"] = kL2Definition;
  j["candidates"] = std::string(to_string(report.strategy));
  j["rules"] = serialize_rules(report.rules, *data.schema);

  auto summary = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    nlohmann::ordered_json r;
    r["mode"] = std::string(to_string(row.mode));
    r["norm"] = std::string(to_string(row.norm));
    r["k1"] = row.nearest;
    r["k" + std::to_string(report.k)] = row.kth;
    r["avg"] = row.average;
    r["found"] = row.found;
    r["instances"] = row.instances;
    r["causal_compliance_pct"] = row.compliance_pct;
    r["blackbox_agreement_pct"] = row.blackbox_agreement_pct;
    summary.push_back(std::move(r));
  }
  j["summary"] = std::move(summary);

  auto runs = nlohmann::ordered_json::array();
  for (const auto& run : report.runs) {
    nlohmann::ordered_json r;
    r["row"] = run.row;
    r["mode"] = std::string(to_string(run.mode));
    r["norm"] = std::string(to_string(run.norm));
    r["status"] = std::string(to_string(run.status));
    auto results = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < run.results.size(); ++i) {
      const auto& res = run.results[i];
      nlohmann::ordered_json e;
      e["state"] = state_to_json(res.state);
      e["cost"] = res.cost.total;
      e["standard_cost"] = run.standard_costs[i];
      e["direct"] = feature_names(*data.schema, res.ledger.direct);
      e["induced"] = feature_names(*data.schema, res.ledger.induced);
      results.push_back(std::move(e));
    }
    r["results"] = std::move(results);
    r["blackbox_favorable"] = run.blackbox_favorable;
    r["blackbox_checked"] = run.blackbox_checked;
    runs.push_back(std::move(r));
  }
  j["runs"] = std::move(runs);
  return j;
}

}  // namespace mc3g

#endif  // MC3G_REPORT_HPP
