#include <gtest/gtest.h>

#include <sstream>

#include "loan.hpp"
#include "mc3g/mc3g.hpp"
#include "oracle.hpp"

using namespace mc3g;

namespace {

SchemaPtr bools(std::size_t n) {
  std::vector<Feature> f;
  for (std::size_t i = 0; i < n; ++i)
    f.push_back(synth::levels(std::string(1, static_cast<char>('A' + i)), FeatureKind::categorical,
                              {"f", "t"}));
  return make_schema(std::move(f));
}

CausalRule implies(const Schema& s, const char* from, const char* to) {
  return CausalRule{{make_literal(s, from, Op::eq, 1)}, make_literal(s, to, Op::eq, 1)};
}

}  // namespace

TEST(CausalConsistency, LoanStates) {
  auto s = loan::schema();
  auto c = loan::causal(*s);
  EXPECT_TRUE(is_causally_consistent(loan::state(s, "no_debt", 40000, 620), c));
  EXPECT_FALSE(is_causally_consistent(loan::state(s, "no_debt", 40000, 400), c));
  CausalRuleSet none(*s, {});
  EXPECT_TRUE(is_causally_consistent(loan::state(s, "no_debt", 40000, 400), none));
}

TEST(CausalGraph, CycleIsRejectedWithItsPath) {
  auto s = bools(3);
  try {
    CausalRuleSet c(*s, {implies(*s, "A", "B"), implies(*s, "B", "A")});
    FAIL() << "expected CyclicCausalGraph";
  } catch (const CyclicCausalGraph& e) {
    std::string what = e.what();
    EXPECT_NE(what.find("A"), std::string::npos);
    EXPECT_NE(what.find("B"), std::string::npos);
  }
  CausalRuleSet c(*s, {implies(*s, "A", "B")});
  EXPECT_THROW(c.add(implies(*s, "B", "A")), CyclicCausalGraph);
  EXPECT_EQ(c.size(), 1u);  // the failed add leaves the set unchanged
  EXPECT_THROW(CausalRuleSet(*s, {implies(*s, "C", "C")}), CyclicCausalGraph);
}

TEST(CausalGraph, TopologicalOrder) {
  auto s = bools(4);
  CausalRuleSet c(*s, {implies(*s, "C", "A"), implies(*s, "D", "C")});
  EXPECT_EQ(c.topological_order(), (std::vector<std::size_t>{1, 3, 2, 0}));
  EXPECT_EQ(c.evaluation_order(), (std::vector<std::size_t>{1, 0}));
}

TEST(ClassifyChanges, John) {
  auto s = loan::schema();
  auto c = loan::causal(*s);
  auto ledger = classify_changes(loan::state(s, ">10000", 40000, 599),
                                 loan::state(s, "no_debt", 60000, 620), c, s->weights());
  EXPECT_EQ(feature_names(*s, ledger.direct), (std::vector<std::string>{"debt", "balance"}));
  EXPECT_EQ(feature_names(*s, ledger.induced), (std::vector<std::string>{"credit"}));
  EXPECT_EQ(ledger.adjusted_weights, (Weights{1, 1, 0}));
}

TEST(ClassifyChanges, NoRulesMeansAllDirect) {
  auto s = loan::schema();
  auto ledger = classify_changes(loan::state(s, ">10000", 40000, 599),
                                 loan::state(s, "no_debt", 60000, 620), CausalRuleSet(*s, {}),
                                 s->weights());
  EXPECT_EQ(ledger.direct.size(), 3u);
  EXPECT_TRUE(ledger.induced.empty());
}

TEST(ClassifyChanges, ChainMatchesOracleOnEveryTransition) {
  auto s = bools(3);
  CausalRuleSet c(*s, {implies(*s, "A", "B"), implies(*s, "B", "C")});
  auto l = classify_changes(State(s, {0, 0, 0}), State(s, {1, 1, 1}), c, s->weights());
  EXPECT_EQ(l.direct, (std::vector<std::size_t>{0}));
  EXPECT_EQ(l.induced, (std::vector<std::size_t>{1, 2}));

  std::vector<State> all = synth::enumerate_states(s);
  for (const auto& a : all)
    for (const auto& b : all) {
      if (!c.consistent(b.values())) {
        EXPECT_THROW(classify_changes(a, b, c, s->weights()), CausallyInconsistentInput);
        continue;
      }
      auto ledger = classify_changes(a, b, c, s->weights());
      auto want = oracle::induced(c, oracle::values(a), oracle::values(b));
      EXPECT_EQ(std::set<std::size_t>(ledger.induced.begin(), ledger.induced.end()), want);
      EXPECT_EQ(ledger.direct.size() + ledger.induced.size(), state_diff(a, b).size());
    }
}

TEST(ClassifyChanges, WeightErrors) {
  auto s = loan::schema();
  auto a = loan::state(s, ">10000", 40000, 599);
  EXPECT_THROW(classify_changes(a, a, loan::causal(*s), Weights{1, 1}), SchemaMismatch);
  EXPECT_THROW(classify_changes(a, a, loan::causal(*s), Weights{1, -1, 1}), NegativeWeight);
}

// Adding causal rules never turns an induced change into a direct one.
TEST(ClassifyChanges, MonotoneInTheRuleSet) {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    auto w = synth::random_world(seed);
    const auto& rules = w.causal.rules();
    CausalRuleSet fewer(*w.data.schema, {rules.begin(), rules.end() - 1});
    const auto& rows = w.data.rows;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      auto small = label_changes(rows[i].values(), rows[i + 1].values(), fewer,
                                 w.data.schema->weights());
      auto big = label_changes(rows[i].values(), rows[i + 1].values(), w.causal,
                               w.data.schema->weights());
      for (auto f : small.induced)
        EXPECT_NE(std::find(big.induced.begin(), big.induced.end(), f), big.induced.end());
      for (std::size_t k = 0; k < big.adjusted_weights.size(); ++k)
        EXPECT_LE(big.adjusted_weights[k], small.adjusted_weights[k]);
    }
  }
}

TEST(IsCounterfactual, LoanExamples) {
  auto s = loan::schema();
  auto c = loan::causal(*s);
  auto q = loan::conjunctive(*s);
  auto john = loan::state(s, ">10000", 40000, 599);
  auto g = is_counterfactual(john, loan::state(s, "no_debt", 60000, 620), c, q, s->weights());
  EXPECT_TRUE(g.valid);
  EXPECT_EQ(g.adjusted_weights(), (Weights{1, 1, 0}));
  auto same = is_counterfactual(john, john, c, q, s->weights());
  EXPECT_FALSE(same.valid);
  EXPECT_EQ(same.adjusted_weights(), s->weights());
  EXPECT_FALSE(
      is_counterfactual(john, loan::state(s, "no_debt", 40000, 400), c, q, s->weights()).valid);
}

TEST(IsCounterfactual, DirectChangeToNonActionableFeature) {
  auto s = loan::schema();
  auto c = loan::causal(*s);
  auto q = loan::disjunctive(*s);
  auto john = loan::state(s, ">10000", 40000, 599);
  // Credit rises without a debt change: a direct edit of a fixed feature.
  EXPECT_FALSE(
      is_counterfactual(john, loan::state(s, ">10000", 65000, 610), c, q, s->weights()).valid);
  EXPECT_TRUE(
      is_counterfactual(john, loan::state(s, "no_debt", 65000, 610), c, q, s->weights()).valid);
}

TEST(CausalJson, RoundTripAndErrors) {
  auto s = loan::schema();
  auto c = loan::causal(*s);
  auto doc = causal_rules_to_json(c, *s);
  EXPECT_EQ(doc[0]["if"][0]["value"], "no_debt");
  auto back = parse_causal_rules(nlohmann::json::parse(doc.dump()), *s);
  EXPECT_EQ(back.rules(), c.rules());

  auto parse = [&](const std::string& text) {
    std::istringstream in(text);
    return parse_causal_rules(in, *s);
  };
  EXPECT_THROW(parse(R"([{"if": [{"feature": "zip", "op": "=", "value": 1}],
                          "then": {"feature": "credit", "op": ">", "value": 599}}])"),
               UnknownFeature);
  EXPECT_THROW(parse(R"([{"if": [], "then": {"feature": "credit", "op": "~", "value": 599}}])"),
               ParseError);
  EXPECT_THROW(parse(R"([{"if": [{"feature": "credit", "op": ">", "value": 1}],
                          "then": {"feature": "debt", "op": "=", "value": "no_debt"}},
                         {"if": [{"feature": "debt", "op": "=", "value": "no_debt"}],
                          "then": {"feature": "credit", "op": ">", "value": 599}}])"),
               CyclicCausalGraph);
  EXPECT_THROW(parse("{"), ParseError);
}
