// Stage 1: summarize each retrieved document in its own language, then ask
// for 1-6 grounded English question-answer pairs per summary.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "nuggetkit/core.hpp"
#include "nuggetkit/diagnostics.hpp"
#include "nuggetkit/providers.hpp"
#include "nuggetkit/serialize.hpp"

namespace nuggetkit::gen {

struct DocSummary {
  std::string doc_id;
  std::string lang;
  std::string summary_text;

  bool operator==(const DocSummary&) const = default;
};

void to_json(Json& j, const DocSummary& v);
void from_json(const Json& j, DocSummary& v);

struct GenConfig {
  int top_k_docs = 50;
  // Longer documents are summarized chunk by chunk.
  std::size_t max_chunk_chars = 24000;
  int max_pairs = 6;
  int parallelism = 1;

  void check() const;
};

/// Throws ContractError on empty text; provider and parse failures propagate.
DocSummary summarize(const Topic& topic, const Document& document, providers::ChatProvider& provider,
                     std::size_t max_chunk_chars = GenConfig{}.max_chunk_chars);

/// Nuggets are numbered from 1 within the document. Failures and odd pair
/// counts are reported to `log`; an unusable response yields no nuggets.
std::vector<CandidateNugget> generate_qa(const Topic& topic, const DocSummary& summary,
                                         providers::ChatProvider& provider, DiagnosticLog& log,
                                         int max_pairs = GenConfig{}.max_pairs);

std::string nugget_id(std::string_view topic_id, std::string_view doc_id, int index);

struct Stage1Result {
  std::vector<DocSummary> summaries;        // rank order
  std::vector<CandidateNugget> candidates;  // rank order, then within-document order
  int documents_processed = 0;
};

Stage1Result run_stage1(const Topic& topic, const RetrievalRanking& ranking,
                        const std::map<std::string, Document>& documents, providers::ChatProvider& provider,
                        const GenConfig& config, DiagnosticLog& log);

}  // namespace nuggetkit::gen
