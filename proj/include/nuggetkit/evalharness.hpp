// Scoring reports against nugget banks: per-answer judging, aggregator
// folding, per-topic nugget recall and macro-averaged leaderboards.
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nuggetkit/core.hpp"
#include "nuggetkit/diagnostics.hpp"
#include "nuggetkit/providers.hpp"
#include "nuggetkit/serialize.hpp"

namespace nuggetkit::eval {

/// One verdict per answer, folded with the nugget's aggregator. A provider
/// failure marks every answer unmatched (never raises a score). Throws
/// ContractError when report and nugget belong to different topics.
Judgment judge_nugget(const Report& report, const QANugget& nugget, providers::ChatProvider& provider,
                      DiagnosticLog& log);

/// Judges every selected nugget of every bank against the run's report for
/// that topic. Reports for topics without a bank are ignored.
JudgmentSet judge_reports(std::span<const Report> reports, std::span<const NuggetBank> banks,
                          providers::ChatProvider& provider, std::string judge_label, DiagnosticLog& log,
                          int parallelism = 1);

/// |addressed selected| / |selected|. Throws ContractError when a selected
/// nugget has no judgment, or when the bank selects nothing.
double nugget_recall(std::string_view run_id, const NuggetBank& bank, const JudgmentSet& judgments);
double nugget_recall(const Report& report, const NuggetBank& bank, const JudgmentSet& judgments);

enum class MissingPolicy { kZero, kSkip };
std::string_view to_string(MissingPolicy p);
MissingPolicy parse_missing_policy(std::string_view s);

struct LeaderboardRow {
  std::string run_id;
  double macro_recall = 0.0;
  std::map<std::string, double> per_topic;

  bool operator==(const LeaderboardRow&) const = default;
};

struct Leaderboard {
  std::string label;
  std::vector<std::string> topic_ids;  // bank topics, sorted
  std::vector<LeaderboardRow> rows;    // macro descending, then run_id
  std::string judged_with;
  std::string bank_fingerprint;
  MissingPolicy missing_policy = MissingPolicy::kZero;

  const LeaderboardRow* find(std::string_view run_id) const;
  /// Runs x topics matrix; topics a row lacks are missing cells.
  ScoreMatrix to_matrix() const;
  /// Throws ContractError when a row's macro is not the mean of its topics.
  void check() const;

  bool operator==(const Leaderboard&) const = default;
};

/// Runs come from the reports. Runs without any report for a bank topic are
/// left out with a diagnostic.
Leaderboard build_leaderboard(std::span<const Report> reports, std::span<const NuggetBank> banks,
                              const JudgmentSet& judgments, MissingPolicy policy, std::string label,
                              DiagnosticLog& log);

/// Rows sorted as in a leaderboard, from precomputed per-topic scores.
Leaderboard leaderboard_from_scores(std::string label, std::vector<std::string> topic_ids,
                                    std::vector<LeaderboardRow> rows);

/// leaderboard.csv: header `run_id,macro,<topic_id...>`, empty cell = absent.
std::string dump_leaderboard_csv(const Leaderboard& lb);
Leaderboard parse_leaderboard_csv(std::string_view content, std::string label);
Leaderboard read_leaderboard_csv(const std::filesystem::path& path);
/// Metadata sidecar (label, judge, policy, fingerprint, rows).
Json leaderboard_json(const Leaderboard& lb);

enum class JudgmentFormat { kNative, kArgueExport };
JudgmentFormat parse_judgment_format(std::string_view s);

/// Aggregator of a (topic_id, nugget_id), or nullopt when unknown.
using AggregatorLookup = std::function<std::optional<Aggregator>(const std::string&, const std::string&)>;
AggregatorLookup aggregator_lookup(std::span<const NuggetBank> banks);

/// Rows that fail to parse are reported and skipped; more than 10% bad rows
/// is a FormatError. With a lookup, `addressed` is recomputed from the
/// verdicts; rows without verdicts keep their stated `addressed`.
JudgmentSet parse_judgments(std::string_view content, JudgmentFormat format, DiagnosticLog& log,
                            const AggregatorLookup& lookup = {}, std::string_view source = "<memory>");
JudgmentSet import_judgments(const std::filesystem::path& path, JudgmentFormat format, DiagnosticLog& log,
                             const AggregatorLookup& lookup = {});

}  // namespace nuggetkit::eval
