// Shared domain types for nugget generation and report evaluation.
//
// Every type here is a plain value: cheap to copy, safe to share across
// threads once built. Identifiers are opaque strings and all deterministic
// orderings are lexicographic on them.
#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace nuggetkit {

struct Persona {
  std::string goal;
  std::string background;
  std::string role;
  std::string communication;
  std::string scope;

  bool operator==(const Persona&) const = default;
};

struct Topic {
  std::string topic_id;
  std::string title;
  std::string request_text;
  std::optional<Persona> persona;

  bool operator==(const Topic&) const = default;
};

struct Document {
  std::string doc_id;
  std::string lang;
  std::string text;

  bool operator==(const Document&) const = default;
};

struct RankedDoc {
  std::string doc_id;
  int rank = 0;
  double score = 0.0;

  bool operator==(const RankedDoc&) const = default;
};

struct RetrievalRanking {
  std::string topic_id;
  std::vector<RankedDoc> entries;

  bool operator==(const RetrievalRanking&) const = default;
};

struct Answer {
  std::string text;
  std::set<std::string> doc_ids;

  bool operator==(const Answer&) const = default;
};

struct CandidateNugget {
  std::string nugget_id;
  std::string topic_id;
  std::string question;
  std::vector<Answer> answers;
  std::string source_doc_id;

  bool operator==(const CandidateNugget&) const = default;
};

enum class Aggregator { kAnd, kOr };

std::string_view to_string(Aggregator a);
Aggregator parse_aggregator(std::string_view s);

/// Logical fold over per-answer verdicts. OR is "any", AND is "all".
/// Throws ContractError on an empty verdict list.
bool fold_aggregator(Aggregator aggregator, std::span<const bool> verdicts);
bool fold_aggregator(Aggregator aggregator, const std::vector<bool>& verdicts);

// ---------------------------------------------------------------------------
// Quality criteria. The order below is the feature layout of every
// QualityVector and of every SVM weight vector; it is part of the file format.

enum class Criterion : std::size_t {
  kReadingLevel,
  kComplexity,
  kVitality,
  kGoalMatch,
  kBackgroundMatch,
  kRoleMatch,
  kCommunicationMatch,
  kScopeMatch,
  kPersonalizationOverall,
  kFluency,
  kClarity,
  kAmbiguity,
  kRelevance,
  kIncompleteness,
  kAssumptiveness,
  kMultifaceted,
  kKnowledgeIntensiveness,
  kSubjectiveness,
  kReasoningIntensiveness,
};

inline constexpr std::size_t kNumCriteria = 19;

struct CriterionInfo {
  std::string_view name;
  double min;
  double max;
  bool binary;
  bool prompted;  // false for the two text-statistic criteria
};

const std::array<CriterionInfo, kNumCriteria>& criteria_table();
const CriterionInfo& criterion_info(Criterion c);
std::optional<Criterion> criterion_by_name(std::string_view name);

struct ClampResult {
  double value;
  bool clamped;
};
/// Clamp a raw value into a criterion's scale; binary criteria round to 0/1.
ClampResult clamp_criterion(Criterion c, double raw);

struct QualityVector {
  std::array<double, kNumCriteria> values{};

  double& operator[](Criterion c) { return values[static_cast<std::size_t>(c)]; }
  double operator[](Criterion c) const { return values[static_cast<std::size_t>(c)]; }
  bool in_range() const;

  bool operator==(const QualityVector&) const = default;
};

// ---------------------------------------------------------------------------

enum class SelectionMethod { kDogmatiq, kCommon, kSample };

std::string_view to_string(SelectionMethod m);
SelectionMethod parse_selection_method(std::string_view s);

struct Provenance {
  std::vector<std::string> member_question_texts;
  int cluster_size = 1;
  int grounding_doc_count = 1;
  std::optional<QualityVector> criteria;
  SelectionMethod selection_method = SelectionMethod::kDogmatiq;
  std::optional<int> selection_rank;

  bool operator==(const Provenance&) const = default;
};

struct QANugget {
  std::string nugget_id;
  std::string topic_id;
  std::string question;
  Aggregator aggregator = Aggregator::kOr;
  std::vector<Answer> answers;
  Provenance provenance;

  bool operator==(const QANugget&) const = default;
};

/// Size of the union of all answers' doc_ids.
int grounding_doc_count(std::span<const Answer> answers);
std::set<std::string> grounding_docs(std::span<const Answer> answers);

struct NuggetBank {
  std::string topic_id;
  std::vector<QANugget> selected;    // in selection_rank order
  std::vector<QANugget> candidates;  // nugget_id order
  SelectionMethod method = SelectionMethod::kDogmatiq;
  std::string config_fingerprint;

  bool operator==(const NuggetBank&) const = default;
};

inline constexpr int kDefaultSelectionCap = 20;

/// Pure invariant check of a bank. Returns human-readable violations; empty
/// means the bank is well formed.
std::vector<std::string> audit_bank(const NuggetBank& bank, int cap = kDefaultSelectionCap);

struct ReportSentence {
  std::string text;
  std::vector<std::string> citations;

  bool operator==(const ReportSentence&) const = default;
};

struct Report {
  std::string run_id;
  std::string topic_id;
  std::vector<ReportSentence> sentences;

  std::string full_text() const;
  bool operator==(const Report&) const = default;
};

struct JudgmentKey {
  std::string run_id;
  std::string topic_id;
  std::string nugget_id;

  auto operator<=>(const JudgmentKey&) const = default;
};

struct Judgment {
  std::vector<bool> answer_verdicts;
  bool addressed = false;

  bool operator==(const Judgment&) const = default;
};

struct JudgmentSet {
  std::string judge_label;
  std::map<JudgmentKey, Judgment> entries;

  bool operator==(const JudgmentSet&) const = default;
};

/// Dense runs x topics matrix; std::nullopt marks a missing score.
struct ScoreMatrix {
  std::string label;
  std::vector<std::string> run_ids;
  std::vector<std::string> topic_ids;
  std::vector<std::vector<std::optional<double>>> scores;  // [run][topic]

  std::optional<double> at(std::string_view run_id, std::string_view topic_id) const;
  /// Mean of the present scores in a row; nullopt when the row is empty.
  std::optional<double> row_mean(std::size_t run) const;
  /// Throws ContractError on shape, label or range violations.
  void check() const;

  bool operator==(const ScoreMatrix&) const = default;
};

// ---------------------------------------------------------------------------

struct ValidationDiagnostic {
  std::string kind;  // duplicate_id, dangling_reference, empty_text, bad_rank
  std::string subject;
  std::string detail;

  bool operator==(const ValidationDiagnostic&) const = default;
};

struct ValidationReport {
  std::vector<ValidationDiagnostic> diagnostics;
  bool ok() const { return diagnostics.empty(); }
};

ValidationReport validate_collection(std::span<const Topic> topics,
                                     std::span<const Document> documents,
                                     std::span<const RetrievalRanking> rankings);

}  // namespace nuggetkit
