#include <gtest/gtest.h>

#include <sstream>

#include "loan.hpp"
#include "mc3g/mc3g.hpp"

using namespace mc3g;
using namespace std::chrono_literals;

namespace {

std::vector<State> batch(std::size_t n) {
  auto s = loan::schema();
  std::vector<State> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(loan::state(s, i % 2 ? "no_debt" : ">10000", 1000.0 * double(i % 1000), 599));
  return out;
}

const char* kEcho = R"(while read -r line; do echo '{"label": "reject"}'; done)";

}  // namespace

TEST(RuleModel, JohnIsRejected) {
  auto s = loan::schema();
  RuleModel m(loan::conjunctive(*s));
  std::vector<State> john{loan::state(s, ">10000", 40000, 599)};
  EXPECT_EQ(m.predict(john), (std::vector<std::string>{"reject"}));
  EXPECT_TRUE(m.predict({}).empty());
  EXPECT_EQ(m.kind(), ModelKind::internal_rules);
  ASSERT_NE(m.rules(), nullptr);
  EXPECT_EQ(RuleModel(loan::conjunctive(*s), false).rules(), nullptr);
}

TEST(SubprocessModel, FixedLabelForEveryRow) {
  SubprocessModel m(kEcho);
  auto labels = m.predict(batch(7));
  EXPECT_EQ(labels, std::vector<std::string>(7, "reject"));
  // The child persists between batches.
  EXPECT_EQ(m.predict(batch(3)).size(), 3u);
  EXPECT_TRUE(m.predict({}).empty());
}

TEST(SubprocessModel, LargeBatchDoesNotDeadlock) {
  SubprocessModel m(kEcho);
  EXPECT_EQ(m.predict(batch(20000)).size(), 20000u);
}

TEST(SubprocessModel, SeesLevelNamesAndNumbers) {
  SubprocessModel m(R"(while read -r line; do case "$line" in
      *'"no_debt",1000.0,599.0'*) echo '{"label": "approve"}';;
      *) echo '{"label": "reject"}';; esac; done)");
  EXPECT_EQ(m.predict(batch(3)), (std::vector<std::string>{"reject", "approve", "reject"}));
}

TEST(SubprocessModel, CrashReportsRow) {
  SubprocessModel m(R"(read -r a; echo '{"label": "x"}'; read -r b; echo '{"label": "x"}'; exit 3)");
  try {
    m.predict(batch(5));
    FAIL() << "expected BlackBoxFailure";
  } catch (const BlackBoxFailure& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(SubprocessModel, MissingCommand) {
  SubprocessModel m("/nonexistent/scorer");
  EXPECT_THROW(m.predict(batch(2)), BlackBoxFailure);
}

TEST(SubprocessModel, MalformedReply) {
  SubprocessModel m(R"(while read -r line; do echo 'label=reject'; done)");
  EXPECT_THROW(m.predict(batch(2)), ProtocolError);
  SubprocessModel n(R"(while read -r line; do echo '{"verdict": "reject"}'; done)");
  EXPECT_THROW(n.predict(batch(2)), ProtocolError);
}

TEST(SubprocessModel, Timeout) {
  SubprocessModel m("sleep 5", 200ms);
  auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(m.predict(batch(1)), Timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 3s);
}

TEST(PredictionsFileModel, ReplaysByRow) {
  auto w = synth::loan_world();
  std::istringstream preds("row_id,label\n0,reject\n1,approve\n");
  PredictionsFileModel m(w.data, preds);
  std::vector<State> two{w.data.rows[1], w.data.rows[0]};
  EXPECT_EQ(m.predict(two), (std::vector<std::string>{"approve", "reject"}));
  std::vector<State> unseen{w.data.rows[2]};
  EXPECT_THROW(m.predict(unseen), MissingPrediction);
  std::istringstream bad("id,label\n0,x\n");
  EXPECT_THROW(PredictionsFileModel(w.data, bad), ParseError);
  std::istringstream bad_id("row_id,label\n-1,x\n");
  EXPECT_THROW(PredictionsFileModel(w.data, bad_id), ParseError);
}

TEST(PredictionsFileModel, LearnsFromRecordedLabels) {
  auto w = synth::german_world(6, 800);
  std::ostringstream csv;
  csv << "row_id,label\n";
  for (std::size_t i = 0; i < w.data.rows.size(); ++i) csv << i << "," << (*w.data.labels)[i] << "\n";
  std::istringstream in(csv.str());
  PredictionsFileModel m(w.data, in);
  LearnerConfig cfg;
  cfg.undesired_label = "bad";
  auto q = extract_logic(m, w.data, cfg);
  EXPECT_GE(fidelity(m, q, w.data).agreement_rate, 0.95);
}
