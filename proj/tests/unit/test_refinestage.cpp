#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "nuggetkit/refinestage.hpp"
#include "nuggetkit/text.hpp"
#include "support/testkit.hpp"

using namespace nuggetkit;
using namespace nuggetkit::refine;
using providers::ChatRequest;
using providers::TemplateId;

namespace {

const Topic kTopic{"T1", "Liberty", "Describe the statue", std::nullopt};

QANugget nugget(std::string id, std::vector<std::string> answers, std::vector<std::string> members = {"Q?"}) {
  QANugget n;
  n.nugget_id = std::move(id);
  n.topic_id = "T1";
  n.question = members.front();
  int d = 0;
  for (auto& a : answers) n.answers.push_back({std::move(a), {"d" + std::to_string(++d)}});
  n.provenance.member_question_texts = std::move(members);
  n.provenance.cluster_size = static_cast<int>(n.provenance.member_question_texts.size());
  n.provenance.grounding_doc_count = grounding_doc_count(n.answers);
  return n;
}

std::vector<std::string> texts(const QANugget& n) {
  std::vector<std::string> out;
  for (const auto& a : n.answers) out.push_back(a.text);
  return out;
}

// Flags answers containing "reportedly"; AND when an answer mentions "and".
std::string refine_script(const ChatRequest& r, const std::string&) {
  switch (r.template_id) {
    case TemplateId::kCanonicalQuestion: return "1";
    case TemplateId::kValidateAnswers: {
      auto list = text::parse_numbered_list(r.variables.at("answers"));
      std::string flagged;
      for (std::size_t i = 0; i < list.size(); ++i)
        if (list[i].find("reportedly") != std::string::npos)
          flagged += (flagged.empty() ? "" : ", ") + std::to_string(i + 1);
      return flagged.empty() ? "REMOVE: none" : "REMOVE: " + flagged;
    }
    case TemplateId::kAssignAggregator: return "OR";
    default: return "?";
  }
}

}  // namespace

TEST_SUITE("refinestage") {
  TEST_CASE("singleton keeps its question without a call") {
    testkit::Scripted p([](const ChatRequest&, const std::string&) { return "other"; });
    DiagnosticLog log;
    auto n = select_canonical_question(nugget("a", {"x"}), kTopic, *p, log);
    CHECK(n.question == "Q?");
    CHECK(*p.calls == 0);
  }

  TEST_CASE("model picks a member verbatim") {
    testkit::Scripted p([](const ChatRequest&, const std::string&) { return "What is its height?"; });
    DiagnosticLog log;
    auto n = select_canonical_question(nugget("a", {"x"}, {"How tall?", "What is its height?"}), kTopic, *p, log);
    CHECK(n.question == "What is its height?");
    CHECK(log.size() == 0);
  }

  TEST_CASE("novel text falls back to the longest member") {
    testkit::Scripted p([](const ChatRequest&, const std::string&) { return "Something else entirely?"; });
    DiagnosticLog log;
    auto n = select_canonical_question(nugget("a", {"x"}, {"How tall?", "What is the total height?"}), kTopic, *p, log);
    CHECK(n.question == "What is the total height?");
    CHECK(log.count("fallback") == 1);
  }

  TEST_CASE("uninformative answers") {
    UninformativePattern p;
    CHECK(texts(filter_uninformative(nugget("a", {"unknown", "93 meters"}), p)) == std::vector<std::string>{"93 meters"});
    CHECK(filter_uninformative(nugget("a", {"Unknown."}), p).answers.empty());
    CHECK(texts(filter_uninformative(nugget("a", {"The cause is unknown to officials"}), p)).size() == 1);
    CHECK(p.matches("  N/A "));
    CHECK_FALSE(p.matches("nonexistent"));
  }

  TEST_CASE("pattern file extends the filter") {
    auto path = std::filesystem::temp_directory_path() / "nuggetkit_unit_patterns.txt";
    std::ofstream(path) << "# comment\n\nto be determined\ntbd\n";
    auto p = UninformativePattern::from_file(path);
    CHECK(p.matches("TBD."));
    CHECK(p.matches("To be determined"));
    CHECK_FALSE(p.matches("unknown"));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(UninformativePattern("(unclosed"), ContractError);
  }

  TEST_CASE("consistency removal") {
    DiagnosticLog log;
    testkit::Scripted one([](const ChatRequest&, const std::string&) { return "REMOVE: 1"; });
    CHECK(texts(validate_consistency(nugget("a", {"x", "y", "z"}), *one, log)) == std::vector<std::string>{"y", "z"});
    testkit::Scripted none([](const ChatRequest&, const std::string&) { return "REMOVE: none"; });
    auto n = nugget("a", {"x", "y"});
    CHECK(validate_consistency(n, *none, log) == n);
    testkit::Scripted all([](const ChatRequest&, const std::string&) { return "REMOVE: 1, 2"; });
    CHECK(validate_consistency(n, *all, log).answers.empty());
  }

  TEST_CASE("consistency failure passes the nugget through") {
    DiagnosticLog log;
    testkit::Scripted broken([](const ChatRequest&, const std::string&) -> std::string { throw std::runtime_error("x"); });
    auto n = nugget("a", {"x", "y"});
    CHECK(validate_consistency(n, *broken, log) == n);
    CHECK(log.count("provider_error") == 1);
  }

  TEST_CASE("aggregator assignment") {
    DiagnosticLog log;
    testkit::Scripted p([](const ChatRequest&, const std::string&) { return "AND"; });
    CHECK(assign_aggregator(nugget("a", {"x"}), *p, log).aggregator == Aggregator::kOr);
    CHECK(*p.calls == 0);
    CHECK(assign_aggregator(nugget("a", {"x", "y", "z"}), *p, log).aggregator == Aggregator::kAnd);
    testkit::Scripted junk([](const ChatRequest&, const std::string&) { return "banana"; });
    CHECK(assign_aggregator(nugget("a", {"x", "y"}), *junk, log).aggregator == Aggregator::kOr);
    CHECK(log.count("parse_error") == 1);
  }

  TEST_CASE("all-uninformative nuggets are culled") {
    testkit::Scripted p(refine_script);
    DiagnosticLog log;
    auto out = run_stage2b({nugget("a", {"Unknown.", "n/a"}), nugget("b", {"305 feet"})}, kTopic, *p, {}, log);
    REQUIRE(out.size() == 1);
    CHECK(out[0].nugget_id == "b");
    CHECK(log.count("culled") == 1);
  }

  TEST_CASE("consistency runs after the pattern filter and before the cull") {
    // The only informative answer is flagged, so the nugget must disappear.
    testkit::Scripted p(refine_script);
    DiagnosticLog log;
    auto out = run_stage2b({nugget("a", {"unknown", "reportedly 400 feet"})}, kTopic, *p, {}, log);
    CHECK(out.empty());
    CHECK(log.count("culled") == 1);
  }

  TEST_CASE("empty input is fine") {
    testkit::Scripted p(refine_script);
    DiagnosticLog log;
    CHECK(run_stage2b({}, kTopic, *p, {}, log).empty());
  }

  TEST_CASE("output is id-sorted, monotone in answers and stable across reruns") {
    std::vector<QANugget> in = {nugget("e", {"one", "two reportedly"}, {"Q5?", "Q5 longer?"}),
                                nugget("c", {"Unknown", "three"}), nugget("a", {"x", "y", "z"}),
                                nugget("d", {"none"}), nugget("b", {"only"})};
    testkit::Scripted p1(refine_script), p2(refine_script);
    DiagnosticLog log;
    RefineConfig wide;
    wide.parallelism = 3;
    auto out = run_stage2b(in, kTopic, *p1, {}, log);
    auto again = run_stage2b(in, kTopic, *p2, wide, log);
    CHECK(out == again);
    REQUIRE(out.size() == 4);
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].nugget_id < out[i].nugget_id);
    for (const auto& n : out) {
      CHECK_FALSE(n.answers.empty());
      const auto& src = *std::find_if(in.begin(), in.end(), [&](const QANugget& x) { return x.nugget_id == n.nugget_id; });
      for (const auto& a : n.answers)
        CHECK(std::find(src.answers.begin(), src.answers.end(), a) != src.answers.end());
      const auto& members = n.provenance.member_question_texts;
      CHECK(std::find(members.begin(), members.end(), n.question) != members.end());
      CHECK(n.provenance.grounding_doc_count == grounding_doc_count(n.answers));
    }
  }
}
