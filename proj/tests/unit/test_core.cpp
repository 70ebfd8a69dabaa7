#include <random>

#include "doctest.h"
#include "nuggetkit/core.hpp"
#include "nuggetkit/errors.hpp"
#include "nuggetkit/serialize.hpp"
#include "support/roundtrip.hpp"

using namespace nuggetkit;

namespace {

struct Collection {
  std::vector<Topic> topics = {{"T1", "Liberty", "Tell me about the statue", std::nullopt},
                               {"T2", "Canal", "Explain the canal", Persona{"g", "b", "r", "c", "s"}}};
  std::vector<Document> docs = {{"d1", "en", "one"}, {"d2", "en", "two"}, {"d3", "es", "tres"}};
  std::vector<RetrievalRanking> rankings = {{"T1", {{"d1", 1, 2.0}, {"d2", 2, 1.0}}}, {"T2", {{"d3", 1, 0.5}}}};
};

QANugget nugget(std::string id, std::vector<Answer> answers) {
  QANugget n;
  n.nugget_id = std::move(id);
  n.topic_id = "T1";
  n.question = "q?";
  n.answers = std::move(answers);
  n.provenance.member_question_texts = {"q?"};
  n.provenance.grounding_doc_count = grounding_doc_count(n.answers);
  return n;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("consistent collection validates cleanly") {
    Collection c;
    CHECK(validate_collection(c.topics, c.docs, c.rankings).ok());
  }

  TEST_CASE("unknown ranked document is one dangling reference") {
    Collection c;
    c.rankings[0].entries.push_back({"X9", 3, 0.1});
    auto r = validate_collection(c.topics, c.docs, c.rankings);
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].kind == "dangling_reference");
    CHECK(r.diagnostics[0].subject.find("X9") != std::string::npos);
  }

  TEST_CASE("duplicate topic id is reported") {
    Collection c;
    c.topics.push_back(c.topics[0]);
    auto r = validate_collection(c.topics, c.docs, c.rankings);
    REQUIRE_FALSE(r.ok());
    CHECK(r.diagnostics[0].kind == "duplicate_id");
  }

  TEST_CASE("repeated ranks and empty texts are reported") {
    Collection c;
    c.rankings[0].entries[1].rank = 1;
    c.docs[1].text = "   ";
    auto r = validate_collection(c.topics, c.docs, c.rankings);
    std::set<std::string> kinds;
    for (const auto& d : r.diagnostics) kinds.insert(d.kind);
    CHECK(kinds.count("bad_rank") == 1);
    CHECK(kinds.count("empty_text") == 1);
  }

  TEST_CASE("aggregator fold table") {
    CHECK(fold_aggregator(Aggregator::kOr, std::vector<bool>{false, true}));
    CHECK_FALSE(fold_aggregator(Aggregator::kAnd, std::vector<bool>{false, true}));
    CHECK(fold_aggregator(Aggregator::kAnd, std::vector<bool>{true, true, true}));
    CHECK_FALSE(fold_aggregator(Aggregator::kOr, std::vector<bool>{false, false}));
    CHECK_THROWS_AS(fold_aggregator(Aggregator::kOr, std::vector<bool>{}), ContractError);
  }

  TEST_CASE("De Morgan holds for random verdicts") {
    std::mt19937 rng(11);
    for (int i = 0; i < 500; ++i) {
      std::vector<bool> v(1 + rng() % 7), neg;
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = rng() & 1;
      for (bool b : v) neg.push_back(!b);
      CHECK(fold_aggregator(Aggregator::kOr, v) == !fold_aggregator(Aggregator::kAnd, neg));
    }
  }

  TEST_CASE("criterion clamping") {
    CHECK(clamp_criterion(Criterion::kFluency, 7.0).value == 5.0);
    CHECK(clamp_criterion(Criterion::kFluency, 7.0).clamped);
    CHECK(clamp_criterion(Criterion::kFluency, 0.5).value == 1.0);
    CHECK(clamp_criterion(Criterion::kVitality, 0.7).value == 1.0);
    CHECK_FALSE(clamp_criterion(Criterion::kClarity, 3.0).clamped);
    CHECK(criteria_table().size() == kNumCriteria);
    CHECK(criterion_by_name("reasoning_intensiveness") == Criterion::kReasoningIntensiveness);
  }

  TEST_CASE("audit accepts a well formed bank and flags each violation") {
    NuggetBank b;
    b.topic_id = "T1";
    b.method = SelectionMethod::kCommon;
    b.candidates = {nugget("a", {{"x", {"d1"}}}), nugget("b", {{"y", {"d1", "d2"}}})};
    for (auto& c : b.candidates) c.provenance.selection_method = SelectionMethod::kCommon;
    b.candidates[1].provenance.selection_rank = 1;
    b.selected = {b.candidates[1]};
    CHECK(audit_bank(b).empty());

    auto broken = b;
    broken.selected[0].provenance.selection_rank = 2;
    CHECK_FALSE(audit_bank(broken).empty());

    broken = b;
    broken.candidates[0].answers.clear();
    CHECK_FALSE(audit_bank(broken).empty());

    broken = b;
    broken.candidates[0].provenance.grounding_doc_count = 3;
    CHECK_FALSE(audit_bank(broken).empty());

    CHECK_FALSE(audit_bank(b, 0).empty());
  }

  TEST_CASE("score matrix accessors") {
    ScoreMatrix m{"x", {"r1", "r2"}, {"T1", "T2"}, {{0.2, 0.4}, {std::nullopt, 1.0}}};
    m.check();
    CHECK(m.at("r1", "T2") == 0.4);
    CHECK_FALSE(m.at("r2", "T1").has_value());
    CHECK(*m.row_mean(0) == doctest::Approx(0.3));
    CHECK(*m.row_mean(1) == 1.0);
    m.scores[0][0] = 1.5;
    CHECK_THROWS_AS(m.check(), ContractError);
  }

  TEST_CASE("every record format round-trips") {
    auto bad = testkit::roundtrip_failures(2024, 100);
    CHECK(bad.empty());
    if (!bad.empty()) MESSAGE("first failing format: " << bad.front());
  }

  TEST_CASE("scores.csv layout") {
    ScoreMatrix m{"x", {"r,1", "r2"}, {"T1", "T2"}, {{0.25, std::nullopt}, {0.5, 1.0}}};
    CHECK(io::dump_scores_csv(m) == "run_id,T1,T2,macro\n\"r,1\",0.25,,0.25\nr2,0.5,1,0.75\n");
    CHECK_THROWS_AS(io::parse_scores_csv("run_id,T1\nr,0.1\n", "x"), FormatError);
    CHECK_THROWS_AS(io::parse_scores_csv("run_id,T1,macro\nr,0.1x,0.1\n", "x"), FormatError);
  }

  TEST_CASE("malformed records raise format errors with a location") {
    try {
      io::parse_jsonl<Topic>("{\"topic_id\": \"T\"}\n", "topics.jsonl");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("topics.jsonl:1") != std::string::npos);
    }
    CHECK_THROWS_AS(io::parse_banks("{\"record\":\"nugget\"}\n"), FormatError);
  }
}
