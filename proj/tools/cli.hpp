#ifndef MC3G_TOOLS_CLI_HPP
#define MC3G_TOOLS_CLI_HPP

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mc3g/mc3g.hpp"

namespace mc3g::cli {

// Process exit codes.
enum Exit : int {
  kOk = 0,
  kConfig = 2,
  kAdapter = 3,
  kNotAdverse = 4,
  kNoCounterfactual = 5,
};

struct Options {
  std::string data, schema, causal, model, rules;
  std::string label_column = "label";
  std::string undesired, favorable;
  std::vector<std::string> norms;
  std::optional<std::size_t> k;
  std::string candidates = "dataset";
  std::string mode;
  std::string out, report;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::optional<std::size_t> row;
  std::string instance;
  std::size_t sample = 0;
  std::string name;
  double grid_step = 0.01;
  std::size_t max_grid = 1'000'000;
  std::size_t max_depth = kDefaultMaxExceptionDepth;
  double min_coverage = 0.02;
  std::string world = "loan";
  std::size_t rows = 1000;
  double timeout = 30.0;
};

inline std::ifstream open_input(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing ") + what + " path");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " '" + path + "'");
  return in;
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

inline Dataset load_data(const Options& o) {
  auto csv_in = open_input(o.data, "data");
  auto schema_in = open_input(o.schema, "schema");
  return load_dataset(csv_in, schema_in, LoadOptions{o.label_column});
}

inline CausalRuleSet load_causal(const Options& o, const Schema& schema) {
  if (o.causal.empty()) return CausalRuleSet(schema, {});
  auto in = open_input(o.causal, "causal rules");
  return parse_causal_rules(in, schema);
}

inline BlackBoxHandle make_model(const Options& o, const Dataset& data) {
  if (o.model.empty()) {
    if (!data.labels)
      throw ConfigError("no --model given and the data has no '" + o.label_column + "' column");
    return std::make_unique<PredictionsFileModel>(data, *data.labels);
  }
  const auto colon = o.model.find(':');
  if (colon == std::string::npos)
    throw ConfigError("model spec '" + o.model + "' must be rules:, exec: or preds:");
  const std::string kind = o.model.substr(0, colon), arg = o.model.substr(colon + 1);
  if (kind == "rules") {
    auto in = open_input(arg, "rules");
    auto q = parse_rules(in, *data.schema, o.max_depth);
    return std::make_unique<RuleModel>(std::move(q));
  }
  if (kind == "exec") {
    if (arg.empty()) throw ConfigError("exec: needs a command");
    return std::make_unique<SubprocessModel>(
        arg, std::chrono::milliseconds(static_cast<long long>(o.timeout * 1000.0)));
  }
  if (kind == "preds") {
    auto in = open_input(arg, "predictions");
    return std::make_unique<PredictionsFileModel>(data, in);
  }
  throw ConfigError("unknown model kind '" + kind + "'");
}

inline LearnerConfig learner_config(const Options& o) {
  LearnerConfig cfg;
  cfg.max_exception_depth = o.max_depth;
  cfg.min_coverage_fraction = o.min_coverage;
  cfg.seed = o.seed;
  cfg.undesired_label = o.undesired;
  cfg.favorable_label = o.favorable;
  return cfg;
}

inline DecisionRuleSet obtain_rules(BlackBox& model, const Dataset& data, const Options& o) {
  if (!model.rules() && o.undesired.empty())
    throw ConfigError("--undesired is required when the model does not expose rules");
  return extract_logic(model, data, learner_config(o));
}

inline CandidateSource candidate_source(const Options& o) {
  CandidateSource src;
  src.strategy = parse_candidate_strategy(o.candidates);
  src.grid_step_fraction = o.grid_step;
  src.max_grid_states = o.max_grid;
  return src;
}

inline std::vector<Norm> norms(const Options& o, std::vector<Norm> fallback) {
  if (o.norms.empty()) return fallback;
  std::vector<Norm> out;
  for (const auto& n : o.norms) out.push_back(parse_norm(n));
  return out;
}

inline std::vector<CostMode> modes(const std::string& text) {
  if (text == "both") return {CostMode::standard, CostMode::mc3g};
  return {parse_cost_mode(text)};
}

inline State parse_instance(const std::string& text, const SchemaPtr& schema) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("--instance: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("--instance must be a JSON object");
  for (const auto& [key, _] : doc.items()) schema->require(key);
  std::vector<double> v(schema->size());
  for (std::size_t i = 0; i < schema->size(); ++i) {
    const auto& f = (*schema)[i];
    if (!doc.contains(f.name)) throw SchemaMismatch("--instance lacks feature '" + f.name + "'");
    const auto& cell = doc.at(f.name);
    if (cell.is_number() && f.kind == FeatureKind::numeric) {
      v[i] = cell.get<double>();
    } else {
      auto parsed = f.parse(cell.is_string() ? cell.get<std::string>() : cell.dump());
      if (!parsed) throw DomainViolation("bad value " + cell.dump(), 0, f.name);
      v[i] = *parsed;
    }
  }
  return State(schema, std::move(v));
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_learn(const Options& o, std::ostream& out, std::ostream& err) {
  auto data = load_data(o);
  auto model = make_model(o, data);
  auto q = obtain_rules(*model, data, o);
  auto report = fidelity(*model, q, data);
  const std::string text = serialize_rules(q, *data.schema);
  const std::string fid = to_json(report).dump(2) + "\n";
  if (o.out.empty())
    out << text;
  else
    write_file(o.out, text);
  if (!o.report.empty())
    write_file(o.report, fid);
  else if (!o.out.empty())
    out << fid;
  else
    err << fid;
  return kOk;
}

inline int cmd_explain(const Options& o, std::size_t k, std::ostream& out, std::ostream& err) {
  auto data = load_data(o);
  auto c = load_causal(o, *data.schema);
  auto model = make_model(o, data);
  if (o.row && !o.instance.empty()) throw ConfigError("give either --row or --instance");
  State s0;
  if (o.row) {
    if (*o.row >= data.rows.size())
      throw ConfigError("row " + std::to_string(*o.row) + " is out of range");
    s0 = data.rows[*o.row];
  } else if (!o.instance.empty()) {
    s0 = parse_instance(o.instance, data.schema);
  } else {
    throw ConfigError("explain needs --row or --instance");
  }
  if (k < 1) throw ConfigError("k must be at least 1");

  auto q = obtain_rules(*model, data, o);
  if (!is_decision_compliant(s0, q))
    throw NotAdverse("instance " + s0.to_string() + " already receives '" + q.favorable + "'");
  const auto w = data.schema->weights();
  const auto requested = norms(o, {Norm::l1});
  auto candidates = generate_candidates(candidate_source(o), data, q, c, &s0);

  nlohmann::ordered_json doc;
  nlohmann::ordered_json inst;
  if (o.row) inst["row"] = *o.row;
  inst["state"] = state_to_json(s0);
  doc["instance"] = std::move(inst);
  doc["label"] = q.undesired;
  doc["candidates"] = o.candidates;
  doc["rules"] = serialize_rules(q, *data.schema);
  auto searches = nlohmann::ordered_json::array();
  bool any = false;
  for (auto mode : modes(o.mode)) {
    for (auto norm : requested) {
      auto found =
          search_counterfactuals(q, c, s0, candidates, w, SearchOptions{norm, k, mode, o.jobs});
      nlohmann::ordered_json s;
      s["mode"] = std::string(to_string(mode));
      s["norm"] = std::string(to_string(norm));
      s["status"] = std::string(to_string(found.status));
      s["candidates"] = found.candidates;
      s["valid"] = found.valid;
      auto list = nlohmann::ordered_json::array();
      for (const auto& r : found.results) {
        auto j = to_json(r, s0);
        nlohmann::ordered_json costs;
        for (auto p : requested) {
          costs[std::string(to_string(p))] = {
              {"mc3g", weighted_lp(*data.schema, s0.values(), r.state.values(),
                                   r.ledger.adjusted_weights, p)},
              {"standard", weighted_lp(*data.schema, s0.values(), r.state.values(), w, p)}};
        }
        j["costs"] = std::move(costs);
        list.push_back(std::move(j));
      }
      s["counterfactuals"] = std::move(list);
      searches.push_back(std::move(s));
      any = any || found.status == SearchStatus::found;
    }
  }
  doc["searches"] = std::move(searches);
  const std::string text = doc.dump(2) + "\n";
  if (o.out.empty())
    out << text;
  else
    write_file(o.out, text);
  if (!any) {
    err << "no counterfactual found among " << candidates.size() << " candidates\n";
    return kNoCounterfactual;
  }
  return kOk;
}

inline std::vector<std::size_t> sample_rows(std::vector<std::size_t> rows, std::size_t n,
                                            std::uint64_t seed) {
  if (n == 0 || n >= rows.size()) return rows;
  synth::Rng rng(seed);
  for (std::size_t i = rows.size(); i > 1; --i)
    std::swap(rows[i - 1], rows[synth::uniform_index(rng, i)]);
  rows.resize(n);
  std::sort(rows.begin(), rows.end());
  return rows;
}

inline int cmd_bench(const Options& o, std::size_t k, std::ostream& out, std::ostream&) {
  auto data = load_data(o);
  auto c = load_causal(o, *data.schema);
  auto model = make_model(o, data);
  auto q = obtain_rules(*model, data, o);

  std::vector<std::size_t> adverse;
  for (std::size_t i = 0; i < data.rows.size(); ++i)
    if (is_decision_compliant(data.rows[i], q)) adverse.push_back(i);
  std::vector<BenchmarkInstance> instances;
  for (auto i : sample_rows(adverse, o.sample, o.seed)) instances.push_back({i, data.rows[i]});

  BenchmarkConfig cfg;
  cfg.dataset = !o.name.empty() ? o.name : std::filesystem::path(o.data).stem().string();
  cfg.norms = norms(o, {Norm::l1, Norm::l2, Norm::l0});
  cfg.k = k;
  cfg.modes = modes(o.mode);
  cfg.source = candidate_source(o);
  cfg.jobs = o.jobs;
  if (cfg.k < 1) throw ConfigError("k must be at least 1");
  auto report = benchmark_with_rules(*model, q, data, instances, c, data.schema->weights(), cfg);

  std::ostringstream csv;
  write_benchmark_csv(csv, report);
  if (o.out.empty()) {
    out << csv.str();
  } else {
    write_file(o.out + ".csv", csv.str());
    write_file(o.out + ".json", benchmark_to_json(report, data).dump(2) + "\n");
  }
  return kOk;
}

inline int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<std::string> problems;
  auto note = [&](const std::string& file, const std::exception& e) {
    problems.push_back(file + ": " + e.what());
  };

  SchemaPtr schema;
  try {
    auto in = open_input(o.schema, "schema");
    schema = load_schema(in);
  } catch (const ConfigError& e) {
    note(o.schema.empty() ? "schema" : o.schema, e);
  }
  if (schema) {
    std::optional<Dataset> data;
    if (!o.data.empty()) {
      try {
        data = load_data(o);
        schema = data->schema;
      } catch (const ConfigError& e) {
        note(o.data, e);
      }
    }
    std::optional<CausalRuleSet> c;
    if (!o.causal.empty()) {
      try {
        c = load_causal(o, *schema);
      } catch (const ConfigError& e) {
        note(o.causal, e);
      }
    }
    if (!o.rules.empty()) {
      try {
        auto in = open_input(o.rules, "rules");
        parse_rules(in, *schema, o.max_depth);
      } catch (const ConfigError& e) {
        note(o.rules, e);
      }
    }
    bool actionable = false;
    for (const auto& f : schema->features()) actionable = actionable || f.actionable;
    if (!actionable)
      problems.push_back((o.schema) + ": no feature is actionable, so no counterfactual exists");
    if (data && c) {
      std::size_t bad = 0;
      for (const auto& r : data->rows) bad += c->consistent(r.values()) ? 0 : 1;
      if (bad)
        err << "warning: " << bad << " data row(s) violate the causal rules and are never "
            << "candidates\n";
    }
  }
  for (const auto& p : problems) err << p << "\n";
  if (!problems.empty()) return kConfig;
  out << "ok\n";
  return kOk;
}

inline int cmd_generate(const Options& o, std::ostream& out, std::ostream&) {
  synth::World w;
  if (o.world == "loan")
    w = synth::loan_world();
  else if (o.world == "adult")
    w = synth::adult_world(o.seed, o.rows);
  else if (o.world == "german")
    w = synth::german_world(o.seed, o.rows);
  else if (o.world == "cars")
    w = synth::cars_world();
  else if (o.world == "random")
    w = synth::random_world(o.seed, synth::RandomWorldOptions{.rows = o.rows});
  else
    throw ConfigError("unknown world '" + o.world + "'");
  if (o.out.empty()) throw ConfigError("generate needs --out <directory>");
  std::error_code ec;
  std::filesystem::create_directories(o.out, ec);
  if (ec) throw ConfigError("cannot create '" + o.out + "': " + ec.message());
  const std::filesystem::path dir(o.out);
  std::ostringstream csv;
  write_dataset(csv, w.data, o.label_column);
  write_file((dir / "data.csv").string(), csv.str());
  write_file((dir / "schema.json").string(), schema_to_json(*w.data.schema).dump(2) + "\n");
  write_file((dir / "causal.json").string(),
             causal_rules_to_json(w.causal, *w.data.schema).dump(2) + "\n");
  write_file((dir / "rules.txt").string(), serialize_rules(w.rules, *w.data.schema));
  out << w.name << ": " << w.data.rows.size() << " rows written to " << o.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causally constrained counterfactual explanations for rule-based surrogates"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--data", o.data, "CSV dataset");
    cmd->add_option("--schema", o.schema, "schema JSON");
    cmd->add_option("--label", o.label_column, "label column in the CSV")->capture_default_str();
  };
  auto modelled = [&](CLI::App* cmd) {
    common(cmd);
    cmd->add_option("--model", o.model, "rules:<path> | exec:<cmd> | preds:<path>");
    cmd->add_option("--undesired", o.undesired, "undesired class label");
    cmd->add_option("--favorable", o.favorable, "favorable class label");
    cmd->add_option("--max-depth", o.max_depth, "maximum exception depth")->capture_default_str();
    cmd->add_option("--min-coverage", o.min_coverage, "minimum rule coverage fraction")
        ->capture_default_str();
    cmd->add_option("--seed", o.seed, "random seed")->capture_default_str();
    cmd->add_option("--timeout", o.timeout, "subprocess model timeout in seconds")
        ->capture_default_str();
  };
  auto searching = [&](CLI::App* cmd) {
    modelled(cmd);
    cmd->add_option("--causal", o.causal, "causal rules JSON");
    cmd->add_option("--norm", o.norms, "l0, l1 or l2 (repeatable)")
        ->check(CLI::IsMember({"l0", "l1", "l2"}));
    cmd->add_option("--k", o.k, "counterfactuals per search (explain 1, bench 20)");
    cmd->add_option("--candidates", o.candidates, "dataset, grid or hybrid")
        ->check(CLI::IsMember({"dataset", "grid", "hybrid"}))
        ->capture_default_str();
    cmd->add_option("--mode", o.mode, "mc3g, standard or both (explain mc3g, bench both)")
        ->check(CLI::IsMember({"mc3g", "standard", "both"}));
    cmd->add_option("--jobs", o.jobs, "worker threads (0 = all cores)")->capture_default_str();
    cmd->add_option("--grid-step", o.grid_step, "grid step as a fraction of feature scale")
        ->capture_default_str();
    cmd->add_option("--max-grid", o.max_grid, "largest admissible grid")->capture_default_str();
  };

  auto* learn = app.add_subcommand("learn", "learn decision rules from a model's labels");
  modelled(learn);
  learn->add_option("--out", o.out, "rule file to write (default stdout)");
  learn->add_option("--report", o.report, "fidelity report JSON");

  auto* explain = app.add_subcommand("explain", "counterfactuals for one instance");
  searching(explain);
  explain->add_option("--row", o.row, "dataset row to explain");
  explain->add_option("--instance", o.instance, "instance as a JSON object");
  explain->add_option("--out", o.out, "result JSON (default stdout)");

  auto* bench = app.add_subcommand("bench", "benchmark both cost modes over adverse rows");
  searching(bench);
  bench->add_option("--sample", o.sample, "number of adverse rows to sample (0 = all)");
  bench->add_option("--name", o.name, "dataset name in the report");
  bench->add_option("--out", o.out, "write <out>.csv and <out>.json (default CSV to stdout)");

  auto* validate = app.add_subcommand("validate", "check schema, data, rules and causal files");
  common(validate);
  validate->add_option("--rules", o.rules, "decision rule file");
  validate->add_option("--causal", o.causal, "causal rules JSON");
  validate->add_option("--max-depth", o.max_depth, "maximum exception depth");

  auto* generate = app.add_subcommand("generate", "write a fixture world");
  generate->add_option("--world", o.world, "loan, adult, german, cars or random")
      ->capture_default_str();
  generate->add_option("--seed", o.seed, "random seed")->capture_default_str();
  generate->add_option("--rows", o.rows, "rows to sample")->capture_default_str();
  generate->add_option("--out", o.out, "output directory")->required();
  generate->add_option("--label", o.label_column, "label column name")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kConfig;
  }

  try {
    if (learn->parsed()) return cmd_learn(o, out, err);
    if (explain->parsed()) {
      if (o.mode.empty()) o.mode = "mc3g";
      return cmd_explain(o, o.k.value_or(1), out, err);
    }
    if (bench->parsed()) {
      if (o.mode.empty()) o.mode = "both";
      return cmd_bench(o, o.k.value_or(20), out, err);
    }
    if (validate->parsed()) return cmd_validate(o, out, err);
    if (generate->parsed()) return cmd_generate(o, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const AdapterError& e) {
    err << "model error: " << e.what() << "\n";
    return kAdapter;
  } catch (const NotAdverse& e) {
    err << "not adverse: " << e.what() << "\n";
    return kNotAdverse;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"mc3g"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace mc3g::cli

#endif  // MC3G_TOOLS_CLI_HPP
