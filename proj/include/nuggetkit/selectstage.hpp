// Stage 3: quality criteria, the three ranking methods and the capped bank.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nuggetkit/core.hpp"
#include "nuggetkit/diagnostics.hpp"
#include "nuggetkit/providers.hpp"
#include "nuggetkit/svm.hpp"

namespace nuggetkit::selection {

/// Flesch-Kincaid grade level, clamped to the criterion scale [4, 13].
double reading_level(std::string_view text);
/// Mean clauses per sentence, where a sentence has one clause plus one per
/// comma, semicolon or subordinating marker; clamped to [1, 6].
double complexity(std::string_view text);
/// Identifier of the two text-statistic proxies, for fingerprints.
inline constexpr std::string_view kTextStatisticsId = "reading:flesch-kincaid:v1;complexity:clauses-per-sentence:v1";

/// Text the statistic criteria are computed over: question then answers.
std::string criteria_text(const QANugget& nugget);
std::string persona_text(const Topic& topic);

/// Criteria 1-2 computed locally; 3-19 prompted one by one. A criterion whose
/// prompt fails falls back to its scale midpoint, except vitality, which
/// falls back to 0.
QualityVector score_criteria(const QANugget& nugget, const Topic& topic, providers::ChatProvider& provider,
                             DiagnosticLog& log, int parallelism = 1);

std::vector<std::string> rank_dogmatiq(std::span<const QANugget> nuggets, std::span<const QualityVector> vectors,
                                       const SvmModel& model);
/// Uses each nugget's provenance.criteria; missing criteria are a contract error.
std::vector<std::string> rank_dogmatiq(std::span<const QANugget> nuggets, const SvmModel& model);
std::vector<std::string> rank_common(std::span<const QANugget> nuggets);
std::vector<std::string> rank_sample(std::span<const QANugget> nuggets, std::uint64_t seed);

/// Uniform shuffle of 0..n-1 from a seeded generator (Fisher-Yates with
/// unbiased bounded draws). Exposed for the uniformity tests.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

struct SelectionConfig {
  SelectionMethod method = SelectionMethod::kCommon;
  int cap = kDefaultSelectionCap;
  std::uint64_t seed = 0;

  void check() const;
};

/// Ranks, caps and stamps provenance. Candidates come out in id order.
NuggetBank select(std::vector<QANugget> nuggets, const SelectionConfig& config, const SvmModel* model,
                  std::string config_fingerprint);

struct MiningConfig {
  // Candidates this close to a positive are checked for paraphrase.
  double prefilter_cosine = 0.8;
  int max_ratio = 5;
  int parallelism = 1;
};

/// Generated nuggets that are not paraphrases of any positive, capped at
/// max_ratio per positive (first by id). With a null verifier, any pair above
/// the prefilter counts as a paraphrase.
std::vector<QANugget> mine_negatives(std::span<const QANugget> positives, std::span<const QANugget> generated,
                                     providers::EmbeddingProvider& embedder, providers::ChatProvider* verifier,
                                     const MiningConfig& config, DiagnosticLog& log);

}  // namespace nuggetkit::selection
