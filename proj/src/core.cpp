#include "nuggetkit/core.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "nuggetkit/errors.hpp"

namespace nuggetkit {

std::string_view to_string(Aggregator a) { return a == Aggregator::kAnd ? "AND" : "OR"; }

Aggregator parse_aggregator(std::string_view s) {
  if (s == "AND") return Aggregator::kAnd;
  if (s == "OR") return Aggregator::kOr;
  throw FormatError("unknown aggregator '" + std::string(s) + "'");
}

namespace {

template <class Range>
bool fold_impl(Aggregator aggregator, const Range& verdicts) {
  if (verdicts.empty()) throw ContractError("fold_aggregator: empty verdict list");
  if (aggregator == Aggregator::kOr)
    return std::any_of(verdicts.begin(), verdicts.end(), [](bool v) { return v; });
  return std::all_of(verdicts.begin(), verdicts.end(), [](bool v) { return v; });
}

}  // namespace

bool fold_aggregator(Aggregator aggregator, std::span<const bool> verdicts) {
  return fold_impl(aggregator, verdicts);
}

bool fold_aggregator(Aggregator aggregator, const std::vector<bool>& verdicts) {
  return fold_impl(aggregator, verdicts);
}

const std::array<CriterionInfo, kNumCriteria>& criteria_table() {
  static const std::array<CriterionInfo, kNumCriteria> table = {{
      {"reading_level", 4.0, 13.0, false, false},
      {"complexity", 1.0, 6.0, false, false},
      {"vitality", 0.0, 1.0, true, true},
      {"goal_match", 0.0, 1.0, false, true},
      {"background_match", 0.0, 1.0, false, true},
      {"role_match", 0.0, 1.0, false, true},
      {"communication_match", 0.0, 1.0, false, true},
      {"scope_match", 0.0, 1.0, false, true},
      {"personalization_overall", 0.0, 1.0, false, true},
      {"fluency", 1.0, 5.0, false, true},
      {"clarity", 1.0, 5.0, false, true},
      {"ambiguity", 1.0, 5.0, false, true},
      {"relevance", 1.0, 5.0, false, true},
      {"incompleteness", 1.0, 5.0, false, true},
      {"assumptiveness", 1.0, 5.0, false, true},
      {"multifaceted", 1.0, 5.0, false, true},
      {"knowledge_intensiveness", 1.0, 5.0, false, true},
      {"subjectiveness", 1.0, 5.0, false, true},
      {"reasoning_intensiveness", 1.0, 5.0, false, true},
  }};
  return table;
}

const CriterionInfo& criterion_info(Criterion c) {
  return criteria_table()[static_cast<std::size_t>(c)];
}

std::optional<Criterion> criterion_by_name(std::string_view name) {
  const auto& t = criteria_table();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i].name == name) return static_cast<Criterion>(i);
  return std::nullopt;
}

ClampResult clamp_criterion(Criterion c, double raw) {
  const auto& info = criterion_info(c);
  if (!std::isfinite(raw)) return {info.binary ? info.min : (info.min + info.max) / 2, true};
  double v = std::clamp(raw, info.min, info.max);
  if (info.binary) v = v >= 0.5 ? 1.0 : 0.0;
  return {v, v != raw};
}

bool QualityVector::in_range() const {
  const auto& t = criteria_table();
  for (std::size_t i = 0; i < kNumCriteria; ++i) {
    double v = values[i];
    if (!(v >= t[i].min && v <= t[i].max)) return false;
    if (t[i].binary && v != 0.0 && v != 1.0) return false;
  }
  return true;
}

std::string_view to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::kDogmatiq: return "dogmatiq";
    case SelectionMethod::kCommon: return "common";
    case SelectionMethod::kSample: return "sample";
  }
  return "dogmatiq";
}

SelectionMethod parse_selection_method(std::string_view s) {
  if (s == "dogmatiq") return SelectionMethod::kDogmatiq;
  if (s == "common") return SelectionMethod::kCommon;
  if (s == "sample") return SelectionMethod::kSample;
  throw FormatError("unknown selection method '" + std::string(s) + "'");
}

std::set<std::string> grounding_docs(std::span<const Answer> answers) {
  std::set<std::string> docs;
  for (const auto& a : answers) docs.insert(a.doc_ids.begin(), a.doc_ids.end());
  return docs;
}

int grounding_doc_count(std::span<const Answer> answers) {
  return static_cast<int>(grounding_docs(answers).size());
}

namespace {

void audit_nugget(const QANugget& n, const std::string& topic_id, std::vector<std::string>& out) {
  const std::string where = "nugget " + n.nugget_id + ": ";
  if (n.nugget_id.empty()) out.push_back("nugget with empty id");
  if (n.topic_id != topic_id) out.push_back(where + "topic_id differs from bank");
  if (n.question.empty()) out.push_back(where + "empty question");
  if (n.answers.empty()) out.push_back(where + "no answers");
  for (const auto& a : n.answers) {
    if (a.text.find_first_not_of(" \t\r\n") == std::string::npos)
      out.push_back(where + "empty answer text");
    if (a.doc_ids.empty()) out.push_back(where + "answer without grounding");
  }
  if (n.provenance.grounding_doc_count != grounding_doc_count(n.answers))
    out.push_back(where + "grounding_doc_count mismatch");
  if (n.provenance.cluster_size < 1 ||
      n.provenance.cluster_size != static_cast<int>(n.provenance.member_question_texts.size()))
    out.push_back(where + "cluster_size mismatch");
  if (n.provenance.criteria && !n.provenance.criteria->in_range())
    out.push_back(where + "criteria out of range");
}

}  // namespace

std::vector<std::string> audit_bank(const NuggetBank& bank, int cap) {
  std::vector<std::string> out;
  if (bank.topic_id.empty()) out.push_back("bank with empty topic_id");
  if (static_cast<int>(bank.selected.size()) > cap)
    out.push_back("selected count " + std::to_string(bank.selected.size()) + " exceeds cap " +
                  std::to_string(cap));

  std::unordered_map<std::string, const QANugget*> by_id;
  for (std::size_t i = 0; i < bank.candidates.size(); ++i) {
    const auto& c = bank.candidates[i];
    if (!by_id.emplace(c.nugget_id, &c).second)
      out.push_back("duplicate candidate id " + c.nugget_id);
    if (i > 0 && !(bank.candidates[i - 1].nugget_id < c.nugget_id))
      out.push_back("candidates not in id order at " + c.nugget_id);
    audit_nugget(c, bank.topic_id, out);
  }

  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < bank.selected.size(); ++i) {
    const auto& s = bank.selected[i];
    audit_nugget(s, bank.topic_id, out);
    if (!seen.insert(s.nugget_id).second) out.push_back("duplicate selected id " + s.nugget_id);
    auto it = by_id.find(s.nugget_id);
    if (it == by_id.end()) {
      out.push_back("selected nugget " + s.nugget_id + " missing from candidates");
    } else if (!(*it->second == s)) {
      out.push_back("selected nugget " + s.nugget_id + " differs from its candidate entry");
    }
    if (s.provenance.selection_rank != static_cast<int>(i + 1))
      out.push_back("selection_rank gap at " + s.nugget_id);
    if (s.provenance.selection_method != bank.method)
      out.push_back("selection_method mismatch at " + s.nugget_id);
  }
  for (const auto& c : bank.candidates)
    if (c.provenance.selection_rank && !seen.count(c.nugget_id))
      out.push_back("candidate " + c.nugget_id + " ranked but not selected");
  return out;
}

std::string Report::full_text() const {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += ' ';
    out += s.text;
  }
  return out;
}

std::optional<double> ScoreMatrix::at(std::string_view run_id, std::string_view topic_id) const {
  auto r = std::find(run_ids.begin(), run_ids.end(), run_id);
  auto t = std::find(topic_ids.begin(), topic_ids.end(), topic_id);
  if (r == run_ids.end() || t == topic_ids.end()) return std::nullopt;
  return scores[r - run_ids.begin()][t - topic_ids.begin()];
}

std::optional<double> ScoreMatrix::row_mean(std::size_t run) const {
  double sum = 0;
  int n = 0;
  for (const auto& v : scores.at(run))
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}

void ScoreMatrix::check() const {
  if (scores.size() != run_ids.size()) throw ContractError("score matrix: row count mismatch");
  for (const auto& row : scores) {
    if (row.size() != topic_ids.size()) throw ContractError("score matrix: column count mismatch");
    for (const auto& v : row)
      if (v && !(*v >= 0.0 && *v <= 1.0)) throw ContractError("score matrix: score outside [0,1]");
  }
  auto unique = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) == v.end();
  };
  if (!unique(run_ids)) throw ContractError("score matrix: duplicate run id");
  if (!unique(topic_ids)) throw ContractError("score matrix: duplicate topic id");
}

namespace {

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

}  // namespace

ValidationReport validate_collection(std::span<const Topic> topics,
                                     std::span<const Document> documents,
                                     std::span<const RetrievalRanking> rankings) {
  ValidationReport report;
  auto add = [&](std::string kind, std::string subject, std::string detail) {
    report.diagnostics.push_back({std::move(kind), std::move(subject), std::move(detail)});
  };

  std::set<std::string> topic_ids;
  for (const auto& t : topics) {
    if (t.topic_id.empty()) add("empty_text", "topic", "empty topic_id");
    if (!topic_ids.insert(t.topic_id).second) add("duplicate_id", t.topic_id, "duplicate topic_id");
    if (blank(t.request_text)) add("empty_text", t.topic_id, "empty request_text");
  }

  std::set<std::string> doc_ids;
  for (const auto& d : documents) {
    if (d.doc_id.empty()) add("empty_text", "document", "empty doc_id");
    if (!doc_ids.insert(d.doc_id).second) add("duplicate_id", d.doc_id, "duplicate doc_id");
    if (blank(d.text)) add("empty_text", d.doc_id, "empty document text");
    if (blank(d.lang)) add("empty_text", d.doc_id, "empty lang");
  }

  std::set<std::string> ranked_topics;
  for (const auto& r : rankings) {
    if (!topic_ids.count(r.topic_id))
      add("dangling_reference", r.topic_id, "ranking for unknown topic");
    if (!ranked_topics.insert(r.topic_id).second)
      add("duplicate_id", r.topic_id, "more than one ranking for topic");
    std::set<std::string> seen;
    int prev = 0;
    for (const auto& e : r.entries) {
      if (!doc_ids.count(e.doc_id))
        add("dangling_reference", r.topic_id + "/" + e.doc_id, "ranking references unknown doc_id");
      if (!seen.insert(e.doc_id).second)
        add("duplicate_id", r.topic_id + "/" + e.doc_id, "doc ranked twice");
      bool first_ok = prev != 0 || e.rank == 1;
      if (!first_ok || e.rank <= prev)
        add("bad_rank", r.topic_id + "/" + e.doc_id, "ranks must increase strictly from 1");
      prev = e.rank;
    }
  }
  return report;
}

}  // namespace nuggetkit
