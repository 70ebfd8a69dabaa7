#include <algorithm>
#include <charconv>
#include <regex>

#include "nuggetkit/providers.hpp"
#include "nuggetkit/text.hpp"

namespace nuggetkit::providers {

namespace {

std::vector<std::string_view> lines_of(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto nl = s.find('\n', pos);
    if (nl == std::string_view::npos) nl = s.size();
    out.push_back(s.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

// Strips list markers such as "1.", "2)", "-", "*".
std::string_view strip_marker(std::string_view line) {
  line = text::trim(line);
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) return text::trim(line.substr(i + 1));
  if (!line.empty() && (line[0] == '-' || line[0] == '*')) return text::trim(line.substr(1));
  return line;
}

// If `line` starts with one of the labels followed by ':', returns the rest.
std::optional<std::string_view> after_label(std::string_view line, std::initializer_list<std::string_view> labels) {
  for (auto label : labels) {
    if (text::starts_with_ci(line, label)) {
      auto rest = text::trim(line.substr(label.size()));
      if (!rest.empty() && rest[0] == ':') return text::trim(rest.substr(1));
    }
  }
  return std::nullopt;
}

std::string unquote(std::string_view s) {
  s = text::trim(s);
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    s = text::trim(s.substr(1, s.size() - 2));
  return std::string(s);
}

// Whole-word occurrences of `word` (exact case unless `ci`).
std::vector<std::size_t> find_word(std::string_view s, std::string_view word, bool ci) {
  std::vector<std::size_t> hits;
  std::string hay = ci ? text::to_lower(s) : std::string(s);
  std::string needle = ci ? text::to_lower(word) : std::string(word);
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
    bool left = pos == 0 || !is_word(hay[pos - 1]);
    bool right = pos + needle.size() == hay.size() || !is_word(hay[pos + needle.size()]);
    if (left && right) hits.push_back(pos);
  }
  return hits;
}

}  // namespace

std::string parse_text(std::string_view raw) {
  std::string_view body = text::trim(raw);
  if (auto rest = after_label(body, {"summary", "question", "canonical question"})) body = *rest;
  std::string out = unquote(body);
  if (out.empty()) throw ParseError("empty response", std::string(raw));
  return out;
}

std::vector<QaPair> parse_qa_pairs(std::string_view raw) {
  std::vector<QaPair> pairs;
  std::optional<std::string> answer, question;
  enum { kNone, kAnswer, kQuestion } last = kNone;
  auto flush = [&] {
    if (answer && question) {
      auto a = std::string(text::trim(*answer));
      auto q = std::string(text::trim(*question));
      if (!a.empty() && !q.empty()) pairs.push_back({q, a});
      answer.reset();
      question.reset();
      last = kNone;
    }
  };
  for (auto line : lines_of(raw)) {
    auto body = strip_marker(line);
    if (body.empty()) continue;
    if (auto a = after_label(body, {"answer", "a"})) {
      if (answer && !question) answer.reset();
      answer = std::string(*a);
      last = kAnswer;
      flush();
    } else if (auto q = after_label(body, {"question", "q"})) {
      if (question && !answer) question.reset();
      question = std::string(*q);
      last = kQuestion;
      flush();
    } else if (last == kAnswer && answer) {
      *answer += " ";
      *answer += body;
    } else if (last == kQuestion && question) {
      *question += " ";
      *question += body;
    }
  }
  if (pairs.empty()) throw ParseError("no A:/Q: pairs found", std::string(raw));
  return pairs;
}

bool parse_yes_no(std::string_view raw) {
  auto yes = find_word(raw, "yes", true);
  auto no = find_word(raw, "no", true);
  if (yes.empty() && no.empty()) throw ParseError("no YES/NO token", std::string(raw));
  if (no.empty()) return true;
  if (yes.empty()) return false;
  return yes.front() < no.front();
}

std::vector<int> parse_removals(std::string_view raw, std::optional<int> count) {
  std::string_view body = text::trim(raw);
  std::optional<std::string_view> list;
  for (auto line : lines_of(raw)) {
    auto l = strip_marker(line);
    if (auto rest = after_label(l, {"remove", "removed", "remove answers"})) {
      list = *rest;
      break;
    }
  }
  if (!list) {
    std::string lower = text::normalize_loose(body);
    if (lower == "none" || lower == "nothing") return {};
    if (body.empty() || body.find_first_not_of("0123456789, ") != std::string_view::npos)
      throw ParseError("no REMOVE line", std::string(raw));
    list = body;
  }
  std::string norm = text::normalize_loose(*list);
  if (norm.empty() || norm == "none" || norm == "nothing" || norm == "n/a") return {};
  std::vector<int> out;
  static const std::regex num(R"(\d+)");
  std::string l(*list);
  for (auto it = std::sregex_iterator(l.begin(), l.end(), num); it != std::sregex_iterator(); ++it) {
    int v = std::stoi(it->str());
    if (count && (v < 1 || v > *count))
      throw ParseError("answer number " + std::to_string(v) + " out of range", std::string(raw));
    out.push_back(v);
  }
  if (out.empty()) throw ParseError("REMOVE line without numbers", std::string(raw));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Aggregator parse_aggregator_verdict(std::string_view raw) {
  bool has_and = !find_word(raw, "AND", false).empty();
  bool has_or = !find_word(raw, "OR", false).empty();
  if (has_and != has_or) return has_and ? Aggregator::kAnd : Aggregator::kOr;
  if (!has_and) {
    std::string single = text::normalize_loose(raw);
    if (single == "and") return Aggregator::kAnd;
    if (single == "or") return Aggregator::kOr;
  }
  throw ParseError("expected exactly one of AND / OR", std::string(raw));
}

CriterionScore parse_criterion(Criterion c, std::string_view raw) {
  static const std::regex labelled(R"(score\s*[:=]?\s*([-+]?\d+(?:\.\d+)?))", std::regex::icase);
  static const std::regex bare(R"([-+]?\d+(?:\.\d+)?)");
  std::string s(raw);
  std::smatch m;
  std::string number;
  if (std::regex_search(s, m, labelled))
    number = m[1].str();
  else if (std::regex_search(s, m, bare))
    number = m[0].str();
  else
    throw ParseError("no numeric score", s);
  double v = 0;
  const char* b = number.data() + (number[0] == '+' ? 1 : 0);
  auto res = std::from_chars(b, number.data() + number.size(), v);
  if (res.ec != std::errc()) throw ParseError("bad numeric score", s);
  auto clamped = clamp_criterion(c, v);
  return {clamped.value, clamped.clamped};
}

Parsed parse_structured(TemplateId id, std::string_view raw) {
  switch (id) {
    case TemplateId::kSummarize:
    case TemplateId::kCanonicalQuestion:
      return parse_text(raw);
    case TemplateId::kGenerateQa:
      return parse_qa_pairs(raw);
    case TemplateId::kVerifyParaphrase:
    case TemplateId::kJudgeNugget:
      return parse_yes_no(raw);
    case TemplateId::kValidateAnswers:
      return parse_removals(raw);
    case TemplateId::kAssignAggregator:
      return parse_aggregator_verdict(raw);
    default:
      break;
  }
  auto c = template_criterion(id);
  if (!c) throw ContractError("unknown template id");
  return parse_criterion(*c, raw);
}

}  // namespace nuggetkit::providers
