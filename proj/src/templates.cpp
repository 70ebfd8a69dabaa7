#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "nuggetkit/hashing.hpp"
#include "nuggetkit/providers.hpp"

namespace nuggetkit::providers {

namespace {

constexpr std::string_view kTemplateVersion = "qa-templates/1";

constexpr std::string_view kSummarize = R"(You are preparing material for a report on the following request.

Request: {{request}}

Summarize the document below. Keep only the information most relevant to the request and drop incidental detail. Write the summary in the document's own language ({{lang}}); do not translate it.

Document:
{{document}}

Summary:)";

constexpr std::string_view kGenerateQa = R"(You write question-answer pairs that a good report on the request below must cover.

Request: {{request}}

Rules:
- Write between 1 and 6 pairs.
- Each pair covers exactly one fact that can be verified from the summary.
- Write every question and every answer in English, whatever the language of the summary.
- Write the answer first, then the question it answers.
- The question must make sense on its own, without the summary.
- Use exactly this layout, one pair per block:
1. A: <answer>
   Q: <question>

Examples:
{{exemplars}}

Summary:
{{summary}}

Pairs:)";

constexpr std::string_view kExemplars = R"(1. A: 93 meters
   Q: How tall is the Statue of Liberty?
2. A: It was dedicated on October 28, 1886.
   Q: When was the Statue of Liberty dedicated?)";

constexpr std::string_view kVerifyParaphrase = R"(Decide whether two questions ask for the same information, so that any correct answer to one is a correct answer to the other.

Questions that differ only in wording, units requested or level of politeness are paraphrases. Questions about different entities, times, quantities or aspects are not.

Example: "What is the Statue of Liberty's height?" / "How tall is the Statue of Liberty?" -> YES
Example: "When was the bridge opened?" / "When was the bridge closed?" -> NO

Question A: {{question_a}}
Question B: {{question_b}}

Reply with a single word, YES or NO.
Answer:)";

constexpr std::string_view kCanonicalQuestion = R"(The questions below were written independently and all ask for the same information. The report they evaluate answers this request:

Request: {{request}}

Questions:
{{questions}}

Choose the single question that best states the underlying information need. Copy it exactly as written, with no numbering and no commentary.
Question:)";

constexpr std::string_view kValidateAnswers = R"(Below is a question and a numbered set of answers, each taken from a different source document.

Question: {{question}}

Answers:
{{answers}}

Remove any answer that is implausible, or that contradicts the other answers in a way that cannot be reconciled. Answers that are consistent but phrased differently (for example, different units) must be kept. If there is only one answer, remove it only if it is implausible.

Example:
Question: How tall is the Statue of Liberty?
1. 93 meters
2. 305 feet
3. 12 meters
REMOVE: 3

Reply on one line as "REMOVE: <comma-separated answer numbers>" or "REMOVE: none".)";

constexpr std::string_view kAssignAggregator = R"(A report is checked against the question below. The answers were gathered from several documents.

Question: {{question}}

Answers:
{{answers}}

If any single answer is enough to address the question, reply OR. If the question is only addressed when all of the answers are given (for example, it asks for a list whose items are spread across the answers), reply AND.

Reply with a single word, AND or OR.)";

constexpr std::string_view kJudgeNugget = R"(Decide whether a report states the given answer to the given question. Paraphrases, translations and unit conversions count as stating it. Citations are not required.

Report:
{{report}}

Question: {{question}}
Answer: {{answer}}

Reply with a single word, YES or NO.)";

constexpr std::string_view kCriterionBase = R"(You rate candidate evaluation questions for a report.

Request: {{request}}
User profile:
{{persona}}

Question: {{question}}
Answers:
{{answers}}

Criterion: @NAME@
@DEFINITION@

Reply as "score: <number>" on a single line, using the scale @SCALE@.)";

struct CriterionPrompt {
  std::string_view label;
  std::string_view definition;
};

// Indexed from vitality (criterion 3) onward.
constexpr CriterionPrompt kCriterionPrompts[17] = {
    {"Vitality", "Is this question essential, such that any good report on the request must answer it? 1 = essential, 0 = optional."},
    {"Goal match", "How well does the question serve the user's stated goal? 0 = not at all, 1 = directly."},
    {"Background match", "How well does the question fit the user's background knowledge? 0 = not at all, 1 = perfectly."},
    {"Role match", "How relevant is the question to the user's role? 0 = irrelevant, 1 = central."},
    {"Communication match", "How well does the question suit the user's preferred communication style? 0 = poorly, 1 = perfectly."},
    {"Scope match", "How well does the question stay within the scope the user asked for? 0 = out of scope, 1 = squarely in scope."},
    {"Overall personalization", "Overall, how well is this question tailored to this user? 0 = generic, 1 = fully tailored."},
    {"Fluency", "How fluent and grammatical is the question? 1 = broken, 5 = perfectly fluent."},
    {"Clarity", "How clear is the question? 1 = very unclear, 5 = completely clear."},
    {"Ambiguity", "How ambiguous is the question? 1 = unambiguous, 5 = highly ambiguous."},
    {"Relevance", "How relevant is the question to the request? 1 = unrelated, 5 = central."},
    {"Incompleteness", "How much context is missing for the question to be answerable on its own? 1 = self-contained, 5 = badly incomplete."},
    {"Assumptiveness", "How many unstated assumptions does the question make? 1 = none, 5 = many."},
    {"Multifacetedness", "How many distinct facets does answering the question involve? 1 = one, 5 = many."},
    {"Knowledge intensiveness", "How much specialised knowledge is needed to answer? 1 = none, 5 = expert."},
    {"Subjectiveness", "How subjective is the question? 1 = purely factual, 5 = purely opinion."},
    {"Reasoning intensiveness", "How much reasoning beyond lookup is required to answer? 1 = none, 5 = extensive."},
};

std::string scale_text(Criterion c) {
  const auto& info = criterion_info(c);
  if (info.binary) return "0 or 1";
  std::ostringstream ss;
  ss.precision(1);
  ss << std::fixed << info.min << " to " << info.max;
  return ss.str();
}

std::string build_criterion_template(std::size_t k) {
  auto c = static_cast<Criterion>(k + static_cast<std::size_t>(Criterion::kVitality));
  std::string t(kCriterionBase);
  auto replace = [&](std::string_view from, std::string_view to) {
    auto pos = t.find(from);
    t.replace(pos, from.size(), to);
  };
  replace("@NAME@", kCriterionPrompts[k].label);
  replace("@DEFINITION@", kCriterionPrompts[k].definition);
  replace("@SCALE@", scale_text(c));
  return t;
}

std::string compute_version(const std::vector<std::string>& texts) {
  Fingerprint fp;
  fp.add("version", kTemplateVersion);
  for (const auto& t : texts) fp.add("t", t);
  return std::string(kTemplateVersion) + "+" + fp.hex().substr(0, 12);
}

}  // namespace

TemplateId criterion_template(Criterion c) {
  auto idx = static_cast<std::size_t>(c);
  if (idx < static_cast<std::size_t>(Criterion::kVitality))
    throw ContractError("criterion '" + std::string(criterion_info(c).name) + "' is not prompted");
  return static_cast<TemplateId>(static_cast<std::size_t>(TemplateId::kCriterionFirst) + idx -
                                 static_cast<std::size_t>(Criterion::kVitality));
}

std::optional<Criterion> template_criterion(TemplateId id) {
  auto idx = static_cast<std::size_t>(id);
  auto first = static_cast<std::size_t>(TemplateId::kCriterionFirst);
  if (idx < first || idx >= kNumTemplates) return std::nullopt;
  return static_cast<Criterion>(idx - first + static_cast<std::size_t>(Criterion::kVitality));
}

std::string template_name(TemplateId id) {
  switch (id) {
    case TemplateId::kSummarize: return "summarize";
    case TemplateId::kGenerateQa: return "generate_qa";
    case TemplateId::kVerifyParaphrase: return "verify_paraphrase";
    case TemplateId::kCanonicalQuestion: return "canonical_question";
    case TemplateId::kValidateAnswers: return "validate_answers";
    case TemplateId::kAssignAggregator: return "assign_aggregator";
    case TemplateId::kJudgeNugget: return "judge_nugget";
    default: break;
  }
  auto c = template_criterion(id);
  if (!c) throw ContractError("unknown template id");
  return "criterion_" + std::string(criterion_info(*c).name);
}

std::optional<TemplateId> template_by_name(std::string_view name) {
  for (auto id : all_templates())
    if (template_name(id) == name) return id;
  return std::nullopt;
}

std::vector<TemplateId> all_templates() {
  std::vector<TemplateId> out;
  for (std::size_t i = 0; i < kNumTemplates; ++i) out.push_back(static_cast<TemplateId>(i));
  return out;
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set = [] {
    TemplateSet s;
    s.texts_ = {std::string(kSummarize),
                std::string(kGenerateQa),
                std::string(kVerifyParaphrase),
                std::string(kCanonicalQuestion),
                std::string(kValidateAnswers),
                std::string(kAssignAggregator),
                std::string(kJudgeNugget)};
    for (std::size_t k = 0; k < 17; ++k) s.texts_.push_back(build_criterion_template(k));
    // The exemplar slot is filled at build time; overrides may replace it.
    auto& qa = s.texts_[static_cast<std::size_t>(TemplateId::kGenerateQa)];
    qa.replace(qa.find("{{exemplars}}"), 13, kExemplars);
    s.version_ = compute_version(s.texts_);
    return s;
  }();
  return set;
}

TemplateSet TemplateSet::with_overrides(const std::filesystem::path& dir) {
  TemplateSet s = builtin();
  for (auto id : all_templates()) {
    auto path = dir / (template_name(id) + ".txt");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    s.texts_[static_cast<std::size_t>(id)] = ss.str();
  }
  s.version_ = compute_version(s.texts_);
  return s;
}

const std::string& TemplateSet::text(TemplateId id) const { return texts_.at(static_cast<std::size_t>(id)); }

std::vector<std::string> TemplateSet::placeholders(TemplateId id) const {
  static const std::regex re(R"(\{\{([A-Za-z0-9_]+)\}\})");
  std::vector<std::string> out;
  const auto& t = text(id);
  for (auto it = std::sregex_iterator(t.begin(), t.end(), re); it != std::sregex_iterator(); ++it)
    out.push_back((*it)[1].str());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string render_prompt(const TemplateSet& templates, const ChatRequest& request) {
  const std::string& t = templates.text(request.template_id);
  std::string out;
  out.reserve(t.size() + 256);
  std::size_t pos = 0;
  while (true) {
    auto open = t.find("{{", pos);
    if (open == std::string::npos) break;
    auto close = t.find("}}", open + 2);
    if (close == std::string::npos) break;
    std::string name = t.substr(open + 2, close - open - 2);
    auto it = request.variables.find(name);
    if (it == request.variables.end())
      throw ContractError("template " + template_name(request.template_id) + ": unbound placeholder '" + name + "'");
    out.append(t, pos, open - pos);
    out += it->second;
    pos = close + 2;
  }
  out.append(t, pos, std::string::npos);
  if (!request.reminder.empty()) {
    out += "\n\n";
    out += request.reminder;
  }
  return out;
}

std::string format_reminder(TemplateId id) {
  switch (id) {
    case TemplateId::kSummarize:
      return "Reminder: reply with the summary text only.";
    case TemplateId::kGenerateQa:
      return "Reminder: write 1 to 6 numbered blocks, each an 'A:' line followed by a 'Q:' line.";
    case TemplateId::kVerifyParaphrase:
    case TemplateId::kJudgeNugget:
      return "Reminder: reply with exactly one word, YES or NO.";
    case TemplateId::kCanonicalQuestion:
      return "Reminder: copy one of the listed questions exactly, nothing else.";
    case TemplateId::kValidateAnswers:
      return "Reminder: reply with one line, 'REMOVE: <numbers>' or 'REMOVE: none'.";
    case TemplateId::kAssignAggregator:
      return "Reminder: reply with exactly one word, AND or OR.";
    default:
      return "Reminder: reply with one line of the form 'score: <number>'.";
  }
}

}  // namespace nuggetkit::providers
