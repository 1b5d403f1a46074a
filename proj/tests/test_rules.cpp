#include <gtest/gtest.h>

#include "loan.hpp"
#include "mc3g/mc3g.hpp"
#include "oracle.hpp"

using namespace mc3g;

namespace {

SchemaPtr bools(std::size_t n) {
  std::vector<Feature> f;
  for (std::size_t i = 0; i < n; ++i)
    f.push_back(synth::levels(std::string(1, static_cast<char>('a' + i)), FeatureKind::categorical,
                              {"f", "t"}));
  return make_schema(std::move(f));
}

}  // namespace

TEST(RuleFires, ConjunctiveLoanRule) {
  auto s = loan::schema();
  auto q = loan::conjunctive(*s);
  EXPECT_TRUE(rule_fires(q.rules[0], loan::state(s, ">10000", 40000, 599)));
  EXPECT_FALSE(rule_fires(q.rules[0], loan::state(s, "no_debt", 60000, 620)));
}

TEST(RuleFires, ExceptionTruthTable) {
  // x :- a = t, b = t except (c = t).
  auto s = bools(3);
  DecisionRule r;
  r.head = "x";
  r.body = {make_literal(*s, "a", Op::eq, 1), make_literal(*s, "b", Op::eq, 1)};
  DecisionRule ex;
  ex.head = "x";
  ex.body = {make_literal(*s, "c", Op::eq, 1)};
  r.exceptions.push_back(ex);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        State st(s, {double(a), double(b), double(c)});
        EXPECT_EQ(rule_fires(r, st), a && b && !c) << st.to_string();
      }
}

TEST(RuleFires, UnknownFeatureInException) {
  auto s = loan::schema();
  auto other = make_schema({synth::numeric("zip", 0, 99999), synth::numeric("balance", 0, 1e6),
                            synth::numeric("credit", 300, 850)});
  DecisionRule r;
  r.head = "reject";
  r.body = {make_literal(*s, "balance", Op::le, 59999)};
  DecisionRule ex;
  ex.head = "reject";
  ex.body = {make_literal(*s, "debt", Op::eq, 0)};
  r.exceptions.push_back(ex);
  EXPECT_THROW(rule_fires(r, State(other, {0, 1, 400})), UnknownFeature);
}

TEST(DecisionCompliance, LoanExamples) {
  auto s = loan::schema();
  auto q = loan::conjunctive(*s);
  EXPECT_TRUE(is_decision_compliant(loan::state(s, ">10000", 40000, 599), q));
  EXPECT_FALSE(is_decision_compliant(loan::state(s, "no_debt", 60000, 620), q));
  DecisionRuleSet empty;
  for (double b : {0.0, 40000.0, 1e6})
    EXPECT_FALSE(is_decision_compliant(loan::state(s, "no_debt", b, 300), empty));
}

TEST(DecisionCompliance, AgreesWithOracleOnRandomWorlds) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto w = synth::random_world(seed);
    for (const auto& r : w.data.rows)
      EXPECT_EQ(is_decision_compliant(r, w.rules), oracle::undesired(w.rules, oracle::values(r)));
  }
}

TEST(Literal, KindChecks) {
  auto s = loan::schema();
  EXPECT_THROW(make_literal(*s, "zip", Op::eq, 1), UnknownFeature);
  EXPECT_THROW(make_literal(*s, "debt", Op::eq, 7), DomainViolation);
  EXPECT_THROW(make_literal(*s, "balance", Op::in, 10, 5), ConfigError);
  auto a = make_literal(*s, "balance", Op::in, 10, 20);
  EXPECT_TRUE(a.holds(std::vector<double>{0, 10, 400}));
  EXPECT_TRUE(a.holds(std::vector<double>{0, 20, 400}));
  EXPECT_FALSE(a.holds(std::vector<double>{0, 21, 400}));
}

TEST(RuleText, OneRuleRoundTrip) {
  auto s = loan::schema();
  auto q = loan::conjunctive(*s);
  auto text = serialize_rules(q, *s);
  EXPECT_EQ(text,
            "@undesired reject\n@favorable approve\n"
            "reject :- balance <= 59999, credit <= 599.\n");
  EXPECT_EQ(parse_rules(text, *s), q);
}

TEST(RuleText, NestedExceptionRoundTrip) {
  auto s = loan::schema();
  const std::string text =
      "% loan policy\n"
      "@undesired reject\n"
      "@favorable approve\n"
      "reject :- balance <= 59999 except (debt = no_debt, balance in [0, 100] except "
      "(credit <= 450)) except (credit > 800).\n"
      "reject :- debt = \">10000\", credit != 500.\n"
      "reject :- true.\n";
  auto q = parse_rules(text, *s);
  ASSERT_EQ(q.rules.size(), 3u);
  EXPECT_EQ(q.rules[0].exceptions.size(), 2u);
  EXPECT_EQ(q.rules[0].exceptions[0].exceptions.size(), 1u);
  EXPECT_EQ(q.rules[0].depth(), 2u);
  EXPECT_TRUE(q.rules[2].body.empty());
  EXPECT_EQ(parse_rules(serialize_rules(q, *s), *s), q);
}

TEST(RuleText, LearnedRulesRoundTrip) {
  auto w = synth::adult_world(3, 800);
  LearnerConfig cfg;
  cfg.undesired_label = w.rules.undesired;
  auto q = learn_rules(w.data, *w.data.labels, cfg);
  EXPECT_EQ(parse_rules(serialize_rules(q, *w.data.schema), *w.data.schema), q);
}

TEST(RuleText, Errors) {
  auto s = loan::schema();
  try {
    parse_rules("reject :- balance => 5.\n", *s);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_GT(e.column(), 1u);
  }
  // reported with its position like any other text error
  EXPECT_THROW(parse_rules("reject :- zip = 1.\n", *s), ParseError);
  EXPECT_THROW(parse_rules("reject :- debt = maybe.\n", *s), ConfigError);
  EXPECT_THROW(parse_rules("reject :- balance <= 5 except (credit > 1.\n", *s), ParseError);
  EXPECT_THROW(parse_rules("reject :- balance <= 5.\napprove :- balance > 5.\n", *s), ParseError);
  EXPECT_THROW(parse_rules("@color red\n", *s), ParseError);
  EXPECT_THROW(parse_rules("reject :- balance <= 5 except (credit > 1 except (credit > 2 except "
                           "(credit > 3))).\n",
                           *s),
               ParseError);
}

TEST(RuleText, QuotedValues) {
  auto s = make_schema({synth::levels("city", FeatureKind::categorical,
                                      {"new york", "a,b", "x.", "true", "<5", "4.5"})});
  DecisionRuleSet q;
  q.undesired = "deny";
  q.favorable = "grant";
  for (double v = 0; v < 6; ++v) {
    DecisionRule r;
    r.head = "deny";
    r.body = {make_literal(*s, "city", Op::eq, v)};
    q.rules.push_back(r);
  }
  auto text = serialize_rules(q, *s);
  EXPECT_NE(text.find("\"new york\""), std::string::npos);
  EXPECT_NE(text.find("city = 4.5"), std::string::npos);
  EXPECT_EQ(parse_rules(text, *s), q);
}
