// Runs each acceptance criterion once and prints one PASS/FAIL line per criterion.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "mc3g/mc3g.hpp"
#include "oracle.hpp"

using namespace mc3g;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Check {
  bool ok = true;
  std::string why;
  void fail(const std::string& reason) {
    if (ok) why = reason;
    ok = false;
  }
};

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("mc3g_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<double>> raw(const std::vector<State>& states) {
  std::vector<std::vector<double>> out;
  for (const auto& s : states) out.push_back(oracle::values(s));
  return out;
}

bool relative_equal(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

// ---------------------------------------------------------------------------

Check john_fixture() {
  Check c;
  const std::string d = MC3G_FIXTURES "/loan";
  auto t = Clock::now();
  auto r = cli({"explain", "--data", d + "/data.csv", "--schema", d + "/schema.json", "--causal",
                d + "/causal.json", "--model", "rules:" + d + "/rules.txt", "--row", "0",
                "--norm", "l0", "--mode", "both"});
  double took = seconds_since(t);
  if (r.code != 0) {
    c.fail("exit " + std::to_string(r.code) + ": " + r.err);
    return c;
  }
  auto doc = nlohmann::json::parse(r.out);
  std::map<std::string, double> cost;
  for (const auto& s : doc["searches"]) {
    if (s["counterfactuals"].empty()) {
      c.fail("no counterfactual in " + s["mode"].get<std::string>() + " mode");
      continue;
    }
    const auto& g = s["counterfactuals"][0];
    nlohmann::json want_state = {{"debt", "no_debt"}, {"balance", 60000}, {"credit", 620}};
    if (g["state"] != want_state) c.fail("g = " + g["state"].dump());
    if (g["direct"] != nlohmann::json({"debt", "balance"})) c.fail("direct = " + g["direct"].dump());
    if (g["induced"] != nlohmann::json({"credit"})) c.fail("induced = " + g["induced"].dump());
    cost[s["mode"]] = g["cost"]["total"];
  }
  if (cost["mc3g"] != 2.0 || cost["standard"] != 3.0)
    c.fail("L0 mc3g " + format_number(cost["mc3g"]) + ", standard " + format_number(cost["standard"]));
  if (took >= 1.0) c.fail("took " + format_number(took) + " s");
  return c;
}

Check causal_compliance() {
  Check c;
  auto t = Clock::now();
  std::size_t searches = 0, emitted = 0;
  for (std::uint64_t seed = 1; searches < 500 && seed < 2000; ++seed) {
    auto w = synth::random_world(seed);
    if (w.causal.empty()) continue;
    const auto& s = *w.data.schema;
    CandidateSet all(w.data.schema, {}, raw(synth::enumerate_states(w.data.schema)));
    const auto sw = s.weights();
    std::size_t used = 0;
    for (const auto& s0 : w.data.rows) {
      if (!is_decision_compliant(s0, w.rules)) continue;
      for (auto p : {Norm::l0, Norm::l1, Norm::l2}) {
        auto out = search_counterfactuals(w.rules, w.causal, s0, all, sw, {p, 10});
        ++searches;
        for (const auto& r : out.results) {
          ++emitted;
          auto v = oracle::values(r.state);
          if (!is_causally_consistent(r.state, w.causal) || !oracle::consistent(w.causal, v))
            c.fail("inconsistent counterfactual in world " + std::to_string(seed));
          if (is_decision_compliant(r.state, w.rules) || oracle::undesired(w.rules, v))
            c.fail("still undesired in world " + std::to_string(seed));
        }
      }
      if (++used == 4) break;
    }
  }
  double took = seconds_since(t);
  if (searches < 500) c.fail("only " + std::to_string(searches) + " searches");
  if (emitted == 0) c.fail("nothing emitted");
  if (took >= 60) c.fail("took " + format_number(took) + " s");
  if (c.ok)
    c.why = std::to_string(searches) + " searches, " + std::to_string(emitted) +
            " counterfactuals, " + format_number(took) + " s";
  return c;
}

// Drops the mode column and splits the rows by mode.
std::pair<std::string, std::string> split_modes(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, standard, mc3g;
  std::getline(in, line);
  while (std::getline(in, line)) {
    auto a = line.find(','), b = line.find(',', a + 1);
    std::string mode = line.substr(a + 1, b - a - 1);
    (mode == "standard" ? standard : mc3g) += line.substr(0, a) + line.substr(b) + "\n";
  }
  return {standard, mc3g};
}

Check cars_equivalence() {
  Check c;
  auto dir = scratch("cars");
  if (cli({"generate", "--world", "cars", "--out", (dir / "cars").string()}).code != 0) {
    c.fail("generate failed");
    return c;
  }
  const std::string d = (dir / "cars").string();
  std::size_t lines = 0;
  for (const char* k : {"1", "5", "20"}) {
    auto r = cli({"bench", "--data", d + "/data.csv", "--schema", d + "/schema.json", "--model",
                  "rules:" + d + "/rules.txt", "--sample", "60", "--seed", "3", "--k", k,
                  "--name", "cars"});
    if (r.code != 0) {
      c.fail("bench exit " + std::to_string(r.code) + ": " + r.err);
      break;
    }
    auto [standard, mc3g] = split_modes(r.out);
    lines += std::count(standard.begin(), standard.end(), '\n');
    if (standard.empty() || standard != mc3g) c.fail(std::string("rows differ at k=") + k);
  }
  fs::remove_all(dir);
  if (c.ok) c.why = std::to_string(lines) + " metric rows per mode identical";
  return c;
}

Check dominance() {
  Check c;
  std::vector<synth::World> worlds{synth::adult_world(1, 1500), synth::german_world(1, 1500)};
  for (std::uint64_t seed = 1; worlds.size() < 22 && seed < 500; ++seed) {
    auto w = synth::random_world(seed);
    if (!w.causal.empty()) worlds.push_back(std::move(w));
  }
  std::size_t triggered_worlds = 0, strict = 0, compared = 0, ties = 0;
  for (const auto& w : worlds) {
    const auto sw = w.data.schema->weights();
    const bool enumerable = synth::state_count(*w.data.schema) <= 1e4;
    CandidateSet set = enumerable
                           ? CandidateSet(w.data.schema, {}, raw(synth::enumerate_states(w.data.schema)))
                           : CandidateSet(w.data.schema, {}, raw(w.data.rows));
    bool triggered = false;
    std::size_t used = 0;
    for (const auto& s0 : w.data.rows) {
      if (!is_decision_compliant(s0, w.rules)) continue;
      for (auto p : {Norm::l0, Norm::l1, Norm::l2}) {
        auto adj = search_counterfactuals(w.rules, w.causal, s0, set, sw, {p, 20, CostMode::mc3g});
        auto std_ = search_counterfactuals(w.rules, w.causal, s0, set, sw, {p, 20, CostMode::standard});
        if (adj.results.size() != std_.results.size()) {
          c.fail(w.name + ": result counts differ");
          continue;
        }
        if (adj.results.empty()) continue;
        // Strictness is checked on the returned states themselves. Across modes the
        // k-th slot can tie, so there it is required only when the standard top-k
        // already holds a state with induced changes.
        bool induced = false, std_induced = false;
        double sum_adj = 0, sum_same = 0, sum_std = 0;
        for (const auto& r : adj.results) {
          double standard = standard_cost(s0, r.state, sw, p).total;
          if (r.cost.total > standard) c.fail(w.name + ": adjusted above standard for one state");
          induced = induced || !r.ledger.induced.empty();
          sum_adj += r.cost.total;
          sum_same += standard;
        }
        for (const auto& r : std_.results) {
          sum_std += r.cost.total;
          std_induced = std_induced || !r.ledger.induced.empty();
        }
        ++compared;
        if (sum_adj > sum_std) c.fail(w.name + ": top-k average above standard");
        if (induced) {
          triggered = true;
          ++strict;
          if (!(sum_adj < sum_same)) c.fail(w.name + ": induced changes returned but no saving");
          ties += !(sum_adj < sum_std);
        }
        if (std_induced && !(sum_adj < sum_std))
          c.fail(w.name + ": standard top-k has induced changes but averages equal");
      }
      if (++used == 6) break;
    }
    triggered_worlds += triggered;
  }
  if (triggered_worlds < 2) c.fail("fewer than two worlds triggered a causal rule");
  if (c.ok)
    c.why = std::to_string(compared) + " comparisons over " + std::to_string(worlds.size()) +
            " worlds, " + std::to_string(strict) + " strict, " + std::to_string(ties) +
            " cross-mode k-th slot ties";
  return c;
}

Check brute_force() {
  Check c;
  auto t = Clock::now();
  std::size_t worlds = 0, compared = 0;
  for (std::uint64_t seed = 100; worlds < 50; ++seed) {
    auto w = synth::random_world(seed);
    const auto& s = *w.data.schema;
    if (synth::state_count(s) > 1e4) continue;
    ++worlds;
    Dataset all;
    all.schema = w.data.schema;
    all.rows = synth::enumerate_states(w.data.schema);
    auto states = raw(all.rows);
    RuleModel model(w.rules);
    const auto sw = s.weights();
    std::size_t used = 0;
    for (const auto& s0 : w.data.rows) {
      if (!is_decision_compliant(s0, w.rules)) continue;
      for (auto p : {Norm::l0, Norm::l1, Norm::l2}) {
        auto out = mc3g::mc3g(model, all, s0, w.causal, {}, sw, {p, 1});
        auto want = oracle::min_cost(s, w.causal, w.rules, oracle::values(s0), states, sw,
                                     static_cast<int>(p), true);
        ++compared;
        if (out.search.results.empty() != !want) {
          c.fail("world " + std::to_string(seed) + ": existence differs");
        } else if (want && !relative_equal(out.search.results[0].cost.total, *want)) {
          c.fail("world " + std::to_string(seed) + ": " +
                 format_number(out.search.results[0].cost.total) + " vs " + format_number(*want));
        }
      }
      if (++used == 2) break;
    }
  }
  double took = seconds_since(t);
  if (took >= 120) c.fail("took " + format_number(took) + " s");
  if (c.ok)
    c.why = std::to_string(compared) + " minima over " + std::to_string(worlds) + " worlds, " +
            format_number(took) + " s";
  return c;
}

Check surrogate_fidelity() {
  Check c;
  auto t = Clock::now();
  std::vector<Feature> f;
  for (int i = 0; i < 4; ++i) f.push_back(synth::numeric("x" + std::to_string(i), 0, 9));
  f.push_back(synth::levels("c", FeatureKind::categorical, {"red", "green", "blue"}));
  auto schema = make_schema(std::move(f));
  const auto& s = *schema;
  DecisionRuleSet truth;
  truth.undesired = "deny";
  truth.favorable = "grant";
  truth.rules = {synth::rule("deny", {synth::lit(s, "x0", Op::le, "3"), synth::lit(s, "x1", Op::gt, "5")},
                             {synth::rule("deny", {synth::lit(s, "c", Op::eq, "red")})}),
                 synth::rule("deny", {synth::lit(s, "x2", Op::gt, "6"), synth::lit(s, "x3", Op::le, "4")})};
  RuleModel hidden(truth, /*transparent=*/false);

  Dataset grid;
  grid.schema = schema;
  grid.rows = synth::enumerate_states(schema);
  Dataset sample;
  sample.schema = schema;
  synth::Rng rng(2024);
  for (int i = 0; i < 2000; ++i) sample.rows.push_back(grid.rows[synth::uniform_index(rng, grid.rows.size())]);

  LearnerConfig cfg;
  cfg.undesired_label = "deny";
  cfg.favorable_label = "grant";
  auto agreement = [&](const DecisionRuleSet& q) {
    std::size_t same = 0;
    for (const auto& g : grid.rows) {
      auto v = oracle::values(g);
      same += oracle::undesired(truth, v) == oracle::undesired(q, v);
    }
    return static_cast<double>(same) / static_cast<double>(grid.rows.size());
  };
  double sampled = agreement(extract_logic(hidden, sample, cfg));
  double full = agreement(extract_logic(hidden, grid, cfg));
  double took = seconds_since(t);
  if (sampled < 0.95) c.fail("2000-row agreement " + format_number(sampled));
  if (full != 1.0) c.fail("full-grid agreement " + format_number(full));
  if (took >= 30) c.fail("took " + format_number(took) + " s");
  if (c.ok)
    c.why = "agreement " + format_number(sampled) + " (2000 rows), " + format_number(full) +
            " (full grid), " + format_number(took) + " s";
  return c;
}

Check parallel_determinism() {
  Check c;
  auto dir = scratch("jobs");
  const char* kinds[] = {"adult", "german", "random"};
  for (int seed = 1; seed <= 3; ++seed) {
    const std::string d = (dir / ("w" + std::to_string(seed))).string();
    const std::string world = kinds[seed - 1];
    if (cli({"generate", "--world", world, "--seed", std::to_string(seed), "--rows", "400",
             "--out", d})
            .code != 0) {
      c.fail("generate failed for seed " + std::to_string(seed));
      continue;
    }
    std::vector<std::string> base{"bench", "--data", d + "/data.csv", "--schema",
                                  d + "/schema.json", "--causal", d + "/causal.json",
                                  "--model", "rules:" + d + "/rules.txt", "--sample", "15",
                                  "--seed", std::to_string(seed), "--candidates", "hybrid"};
    std::string out[2];
    int i = 0;
    for (const char* jobs : {"1", "8"}) {
      auto args = base;
      for (const auto& extra : {std::string("--jobs"), std::string(jobs), std::string("--out"),
                                d + "/report_" + jobs})
        args.push_back(extra);
      auto r = cli(args);
      if (r.code != 0) c.fail(world + " exit " + std::to_string(r.code) + ": " + r.err);
      out[i++] = slurp(d + "/report_" + jobs + ".csv") + slurp(d + "/report_" + jobs + ".json");
    }
    if (out[0].empty() || out[0] != out[1]) c.fail(world + " reports differ between job counts");
  }
  fs::remove_all(dir);
  return c;
}

Check pass_through() {
  Check c;
  std::vector<synth::World> worlds{synth::loan_world(), synth::adult_world(3, 50),
                                   synth::german_world(3, 50), synth::cars_world()};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) worlds.push_back(synth::random_world(seed));
  for (const auto& w : worlds) {
    RuleModel model(w.rules);
    auto q = extract_logic(model, w.data, {});
    if (!(q == w.rules)) c.fail(w.name + ": extracted rules differ");
    if (serialize_rules(q, *w.data.schema) != serialize_rules(w.rules, *w.data.schema))
      c.fail(w.name + ": serialized rules differ");
  }
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"1 John fixture exactness", john_fixture},
      {"2 causal compliance 100%", causal_compliance},
      {"3 no-causal-rule equivalence", cars_equivalence},
      {"4 dominance on causal worlds", dominance},
      {"5 brute-force optimality", brute_force},
      {"6 surrogate fidelity", surrogate_fidelity},
      {"7 determinism under parallelism", parallel_determinism},
      {"8 pass-through branch", pass_through},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Check c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c.fail(std::string("exception: ") + e.what());
    }
    failed += !c.ok;
    std::cout << (c.ok ? "PASS " : "FAIL ") << name;
    if (!c.why.empty()) std::cout << " (" << c.why << ")";
    std::cout << std::endl;
  }
  return failed ? 1 : 0;
}
