#include "nuggetkit/genstage.hpp"

#include <optional>

#include "nuggetkit/text.hpp"

namespace nuggetkit::gen {

using providers::ChatRequest;
using providers::TemplateId;

void to_json(Json& j, const DocSummary& v) {
  j = Json{{"doc_id", v.doc_id}, {"lang", v.lang}, {"summary_text", v.summary_text}};
}

void from_json(const Json& j, DocSummary& v) {
  v.doc_id = io::json_string(j, "doc_id");
  v.lang = io::json_string(j, "lang");
  v.summary_text = io::json_string(j, "summary_text");
}

void GenConfig::check() const {
  if (top_k_docs < 1) throw ContractError("top_k_docs must be >= 1");
  if (max_chunk_chars < 64) throw ContractError("max_chunk_chars must be >= 64");
  if (max_pairs < 1) throw ContractError("max_pairs must be >= 1");
}

std::string nugget_id(std::string_view topic_id, std::string_view doc_id, int index) {
  return std::string(topic_id) + "/" + std::string(doc_id) + "/" + std::to_string(index);
}

DocSummary summarize(const Topic& topic, const Document& document, providers::ChatProvider& provider,
                     std::size_t max_chunk_chars) {
  if (text::trim(document.text).empty()) throw ContractError("document " + document.doc_id + " has empty text");
  std::string joined;
  for (const auto& piece : text::chunk(document.text, max_chunk_chars)) {
    ChatRequest req;
    req.template_id = TemplateId::kSummarize;
    req.variables = {{"request", topic.request_text}, {"lang", document.lang}, {"document", piece}};
    auto summary = providers::chat_parsed(provider, req, providers::parse_text);
    if (!joined.empty()) joined += '\n';
    joined += summary;
  }
  return {document.doc_id, document.lang, joined};
}

std::vector<CandidateNugget> generate_qa(const Topic& topic, const DocSummary& summary,
                                         providers::ChatProvider& provider, DiagnosticLog& log, int max_pairs) {
  ChatRequest req;
  req.template_id = TemplateId::kGenerateQa;
  req.variables = {{"request", topic.request_text}, {"summary", summary.summary_text}};
  std::vector<providers::QaPair> pairs;
  try {
    pairs = providers::chat_parsed(provider, req, providers::parse_qa_pairs);
  } catch (const ProviderError& e) {
    log.add("stage1", "provider_error", summary.doc_id, e.what());
    return {};
  } catch (const ParseError& e) {
    log.add("stage1", "no_pairs", summary.doc_id, e.what());
    return {};
  }
  if (pairs.size() > static_cast<std::size_t>(max_pairs)) {
    log.add("stage1", "truncated", summary.doc_id,
            std::to_string(pairs.size()) + " pairs, kept " + std::to_string(max_pairs));
    pairs.resize(static_cast<std::size_t>(max_pairs));
  }
  std::vector<CandidateNugget> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CandidateNugget n;
    n.nugget_id = nugget_id(topic.topic_id, summary.doc_id, static_cast<int>(i + 1));
    n.topic_id = topic.topic_id;
    n.question = pairs[i].question;
    n.answers = {Answer{pairs[i].answer, {summary.doc_id}}};
    n.source_doc_id = summary.doc_id;
    out.push_back(std::move(n));
  }
  return out;
}

Stage1Result run_stage1(const Topic& topic, const RetrievalRanking& ranking,
                        const std::map<std::string, Document>& documents, providers::ChatProvider& provider,
                        const GenConfig& config, DiagnosticLog& log) {
  config.check();
  std::vector<const Document*> docs;
  for (const auto& entry : ranking.entries) {
    if (docs.size() >= static_cast<std::size_t>(config.top_k_docs)) break;
    auto it = documents.find(entry.doc_id);
    if (it == documents.end()) {
      log.add("stage1", "missing_document", entry.doc_id, "ranked document not in collection");
      continue;
    }
    docs.push_back(&it->second);
  }

  struct Slot {
    std::optional<DocSummary> summary;
    std::vector<CandidateNugget> nuggets;
  };
  std::vector<Slot> slots(docs.size());
  parallel_for(docs.size(), config.parallelism, [&](std::size_t i) {
    const Document& doc = *docs[i];
    try {
      slots[i].summary = summarize(topic, doc, provider, config.max_chunk_chars);
    } catch (const ProviderError& e) {
      log.add("stage1", "provider_error", doc.doc_id, std::string("summary skipped: ") + e.what());
      return;
    } catch (const ParseError& e) {
      log.add("stage1", "parse_error", doc.doc_id, std::string("summary skipped: ") + e.what());
      return;
    } catch (const ContractError& e) {
      log.add("stage1", "empty_document", doc.doc_id, e.what());
      return;
    }
    slots[i].nuggets = generate_qa(topic, *slots[i].summary, provider, log, config.max_pairs);
  });

  Stage1Result result;
  for (auto& slot : slots) {
    if (!slot.summary) continue;
    ++result.documents_processed;
    result.summaries.push_back(std::move(*slot.summary));
    for (auto& n : slot.nuggets) result.candidates.push_back(std::move(n));
  }
  return result;
}

}  // namespace nuggetkit::gen
