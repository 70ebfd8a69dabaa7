// Stage 2B: per-cluster refinement. Picks a canonical question, drops
// uninformative and inconsistent answers, culls nuggets left without answers
// and assigns the AND/OR aggregator.
#pragma once

#include <filesystem>
#include <regex>
#include <string>
#include <vector>

#include "nuggetkit/core.hpp"
#include "nuggetkit/diagnostics.hpp"
#include "nuggetkit/providers.hpp"

namespace nuggetkit::refine {

/// Case-insensitive pattern matched against the whole answer after trimming
/// and stripping edge punctuation.
class UninformativePattern {
 public:
  UninformativePattern();  // the builtin list
  explicit UninformativePattern(std::string pattern);
  /// One regular expression per line; blank lines and '#' comments ignored.
  static UninformativePattern from_file(const std::filesystem::path& path);

  bool matches(std::string_view answer) const;
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::regex re_;
};

inline constexpr std::string_view kDefaultUninformative =
    "none|null|nil|no answer|unknown|n/?a|not specified|not mentioned|not available|not stated";

QANugget select_canonical_question(QANugget nugget, const Topic& topic, providers::ChatProvider& provider,
                                   DiagnosticLog& log);
QANugget filter_uninformative(QANugget nugget, const UninformativePattern& pattern);
/// Removal only; on any failure the nugget passes through unchanged.
QANugget validate_consistency(QANugget nugget, providers::ChatProvider& provider, DiagnosticLog& log);
QANugget assign_aggregator(QANugget nugget, providers::ChatProvider& provider, DiagnosticLog& log);

struct RefineConfig {
  UninformativePattern pattern;
  int parallelism = 1;
};

/// canonical -> pattern filter -> consistency -> cull -> aggregator, per
/// nugget. Output sorted by nugget_id.
std::vector<QANugget> run_stage2b(std::vector<QANugget> merged, const Topic& topic,
                                  providers::ChatProvider& provider, const RefineConfig& config, DiagnosticLog& log);

}  // namespace nuggetkit::refine
