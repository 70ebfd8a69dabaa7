// Stage 2A: paraphrase detection and single-link clustering of candidate
// questions. Pairs above a cosine threshold are checked by an LLM; the
// surviving edges define connected components, and each component is merged
// into one nugget carrying every member's grounded answers.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "nuggetkit/core.hpp"
#include "nuggetkit/diagnostics.hpp"
#include "nuggetkit/providers.hpp"
#include "nuggetkit/serialize.hpp"

namespace nuggetkit::cluster {

struct ParaphraseEdge {
  std::string nugget_id_a;  // a < b
  std::string nugget_id_b;
  double cosine = 0.0;
  bool verified = false;

  bool operator==(const ParaphraseEdge&) const = default;
};

void to_json(Json& j, const ParaphraseEdge& v);
void from_json(const Json& j, ParaphraseEdge& v);

struct ClusterConfig {
  double cosine_threshold = 0.9;
  bool verify_with_llm = true;
  int parallelism = 1;

  void check() const;
};

/// Every pair with cosine strictly above the threshold, canonicalized and
/// sorted by (a, b). `vectors` must be unit length.
std::vector<ParaphraseEdge> candidate_pairs(const std::vector<std::string>& ids,
                                            const std::vector<providers::Vector>& vectors, double threshold);

/// Embeds the questions then defers to the vector overload. Embedding
/// failure is fatal for the stage (StageError).
std::vector<ParaphraseEdge> candidate_pairs(const std::vector<std::string>& ids,
                                            const std::vector<std::string>& questions,
                                            providers::EmbeddingProvider& embedder, const ClusterConfig& config);

/// Asks the provider about every edge and returns all of them with the
/// verdict recorded. Unparseable or failed checks count as NO.
std::vector<ParaphraseEdge> judge_pairs(std::vector<ParaphraseEdge> edges,
                                        const std::map<std::string, std::string>& questions,
                                        providers::ChatProvider& provider, DiagnosticLog& log, int parallelism = 1);

/// The YES subset of judge_pairs.
std::vector<ParaphraseEdge> verify_pairs(std::vector<ParaphraseEdge> edges,
                                         const std::map<std::string, std::string>& questions,
                                         providers::ChatProvider& provider, DiagnosticLog& log, int parallelism = 1);

/// Partition into connected components. Clusters and their members are
/// sorted; singletons are included. Unknown ids throw ContractError.
std::vector<std::vector<std::string>> connected_components(const std::vector<std::string>& ids,
                                                           const std::vector<ParaphraseEdge>& edges);

/// Members must share a topic. The merged id is the smallest member id.
QANugget merge_cluster(const std::vector<CandidateNugget>& cluster);

struct Stage2aResult {
  std::vector<ParaphraseEdge> edges;  // all candidate edges with verdicts
  std::vector<std::vector<std::string>> clusters;
  std::vector<QANugget> merged;  // one per cluster, in cluster order
};

/// `verifier` may be null when config.verify_with_llm is false.
Stage2aResult run_stage2a(const std::vector<CandidateNugget>& candidates, providers::EmbeddingProvider& embedder,
                          providers::ChatProvider* verifier, const ClusterConfig& config, DiagnosticLog& log);

}  // namespace nuggetkit::cluster
