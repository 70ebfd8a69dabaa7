#include "nuggetkit/refinestage.hpp"

#include <algorithm>
#include <optional>

#include "nuggetkit/serialize.hpp"
#include "nuggetkit/text.hpp"

namespace nuggetkit::refine {

using providers::ChatRequest;
using providers::TemplateId;

namespace {

std::regex compile(const std::string& alternatives) {
  try {
    return std::regex("^(?:" + alternatives + ")$", std::regex::ECMAScript | std::regex::icase);
  } catch (const std::regex_error& e) {
    throw ContractError("invalid uninformative pattern '" + alternatives + "': " + e.what());
  }
}

std::vector<std::string> answer_texts(const QANugget& n) {
  std::vector<std::string> out;
  for (const auto& a : n.answers) out.push_back(a.text);
  return out;
}

void recount(QANugget& n) { n.provenance.grounding_doc_count = grounding_doc_count(n.answers); }

const std::string& longest(const std::vector<std::string>& xs) {
  // Ties go to the earliest member.
  return *std::max_element(xs.begin(), xs.end(),
                           [](const std::string& a, const std::string& b) { return a.size() < b.size(); });
}

// Map a model reply back onto one of the member questions.
std::optional<std::size_t> match_member(std::string_view reply, const std::vector<std::string>& members) {
  auto want = text::normalize_loose(reply);
  for (std::size_t i = 0; i < members.size(); ++i)
    if (text::normalize_loose(members[i]) == want) return i;
  // A bare list number.
  if (!want.empty() && want.find_first_not_of("0123456789") == std::string::npos && want.size() < 4) {
    auto k = static_cast<std::size_t>(std::stoi(want));
    if (k >= 1 && k <= members.size()) return k - 1;
  }
  std::optional<std::size_t> best;
  double best_sim = 0.9;
  for (std::size_t i = 0; i < members.size(); ++i) {
    double s = text::edit_similarity(want, text::normalize_loose(members[i]));
    if (s >= best_sim && (!best || s > best_sim)) {
      best = i;
      best_sim = s;
    }
  }
  return best;
}

}  // namespace

UninformativePattern::UninformativePattern() : UninformativePattern(std::string(kDefaultUninformative)) {}

UninformativePattern::UninformativePattern(std::string pattern)
    : source_(std::move(pattern)), re_(compile(source_)) {}

UninformativePattern UninformativePattern::from_file(const std::filesystem::path& path) {
  std::string joined;
  io::for_each_line(io::read_file(path), [&](std::string_view line, std::size_t) {
    if (line.front() == '#') return;
    if (!joined.empty()) joined += '|';
    joined += "(?:" + std::string(line) + ")";
  });
  if (joined.empty()) throw ContractError("pattern file " + path.string() + " has no patterns");
  return UninformativePattern(joined);
}

bool UninformativePattern::matches(std::string_view answer) const {
  return std::regex_match(text::normalize_loose(answer), re_);
}

QANugget select_canonical_question(QANugget nugget, const Topic& topic, providers::ChatProvider& provider,
                                   DiagnosticLog& log) {
  auto& members = nugget.provenance.member_question_texts;
  if (members.empty()) members.push_back(nugget.question);
  if (members.size() == 1) {
    nugget.question = members.front();
    return nugget;
  }
  ChatRequest req;
  req.template_id = TemplateId::kCanonicalQuestion;
  req.variables = {{"request", topic.request_text}, {"questions", text::numbered_list(members)}};
  try {
    auto reply = providers::chat_parsed(provider, req, providers::parse_text);
    if (auto idx = match_member(reply, members)) {
      nugget.question = members[*idx];
      return nugget;
    }
    log.add("stage2b", "fallback", nugget.nugget_id, "canonical question not among members: " + reply);
  } catch (const ProviderError& e) {
    log.add("stage2b", "provider_error", nugget.nugget_id, e.what());
  } catch (const ParseError& e) {
    log.add("stage2b", "parse_error", nugget.nugget_id, e.what());
  }
  nugget.question = longest(members);
  return nugget;
}

QANugget filter_uninformative(QANugget nugget, const UninformativePattern& pattern) {
  std::erase_if(nugget.answers, [&](const Answer& a) { return pattern.matches(a.text); });
  recount(nugget);
  return nugget;
}

QANugget validate_consistency(QANugget nugget, providers::ChatProvider& provider, DiagnosticLog& log) {
  if (nugget.answers.empty()) throw ContractError("validate_consistency: nugget has no answers");
  ChatRequest req;
  req.template_id = TemplateId::kValidateAnswers;
  req.variables = {{"question", nugget.question}, {"answers", text::numbered_list(answer_texts(nugget))}};
  int count = static_cast<int>(nugget.answers.size());
  std::vector<int> removals;
  try {
    removals = providers::chat_parsed(provider, req,
                                      [count](std::string_view raw) { return providers::parse_removals(raw, count); });
  } catch (const ProviderError& e) {
    log.add("stage2b", "provider_error", nugget.nugget_id, e.what());
    return nugget;
  } catch (const ParseError& e) {
    log.add("stage2b", "parse_error", nugget.nugget_id, e.what());
    return nugget;
  }
  std::vector<Answer> kept;
  for (int i = 0; i < count; ++i)
    if (!std::binary_search(removals.begin(), removals.end(), i + 1)) kept.push_back(nugget.answers[i]);
  nugget.answers = std::move(kept);
  recount(nugget);
  return nugget;
}

QANugget assign_aggregator(QANugget nugget, providers::ChatProvider& provider, DiagnosticLog& log) {
  if (nugget.answers.empty()) throw ContractError("assign_aggregator: nugget has no answers");
  nugget.aggregator = Aggregator::kOr;
  if (nugget.answers.size() == 1) return nugget;
  ChatRequest req;
  req.template_id = TemplateId::kAssignAggregator;
  req.variables = {{"question", nugget.question}, {"answers", text::numbered_list(answer_texts(nugget))}};
  try {
    nugget.aggregator = providers::chat_parsed(provider, req, providers::parse_aggregator_verdict);
  } catch (const ProviderError& e) {
    log.add("stage2b", "provider_error", nugget.nugget_id, e.what());
  } catch (const ParseError& e) {
    log.add("stage2b", "parse_error", nugget.nugget_id, std::string("defaulting to OR: ") + e.what());
  }
  return nugget;
}

std::vector<QANugget> run_stage2b(std::vector<QANugget> merged, const Topic& topic,
                                  providers::ChatProvider& provider, const RefineConfig& config, DiagnosticLog& log) {
  std::vector<std::optional<QANugget>> slots(merged.size());
  parallel_for(merged.size(), config.parallelism, [&](std::size_t i) {
    auto n = select_canonical_question(std::move(merged[i]), topic, provider, log);
    n = filter_uninformative(std::move(n), config.pattern);
    if (n.answers.empty()) {
      log.add("stage2b", "culled", n.nugget_id, "all answers uninformative");
      return;
    }
    n = validate_consistency(std::move(n), provider, log);
    if (n.answers.empty()) {
      log.add("stage2b", "culled", n.nugget_id, "all answers removed by consistency check");
      return;
    }
    slots[i] = assign_aggregator(std::move(n), provider, log);
  });
  std::vector<QANugget> out;
  for (auto& s : slots)
    if (s) out.push_back(std::move(*s));
  std::sort(out.begin(), out.end(), [](const QANugget& a, const QANugget& b) { return a.nugget_id < b.nugget_id; });
  return out;
}

}  // namespace nuggetkit::refine
