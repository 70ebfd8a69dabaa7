#include "nuggetkit/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include "nuggetkit/hashing.hpp"
#include "nuggetkit/text.hpp"

namespace nuggetkit::eval {

using providers::ChatRequest;

Judgment judge_nugget(const Report& report, const QANugget& nugget, providers::ChatProvider& provider,
                      DiagnosticLog& log) {
  if (report.topic_id != nugget.topic_id)
    throw ContractError("judge_nugget: report topic " + report.topic_id + " differs from nugget topic " +
                        nugget.topic_id);
  if (nugget.answers.empty()) throw ContractError("judge_nugget: nugget " + nugget.nugget_id + " has no answers");
  std::string subject = report.run_id + "|" + nugget.nugget_id;
  std::string body = report.full_text();
  Judgment j;
  j.answer_verdicts.assign(nugget.answers.size(), false);
  for (std::size_t i = 0; i < nugget.answers.size(); ++i) {
    ChatRequest req;
    req.template_id = providers::TemplateId::kJudgeNugget;
    req.variables = {{"report", body}, {"question", nugget.question}, {"answer", nugget.answers[i].text}};
    req.max_output_tokens = 8;
    try {
      j.answer_verdicts[i] = providers::chat_parsed(provider, req, providers::parse_yes_no);
    } catch (const ProviderError& e) {
      j.answer_verdicts.assign(nugget.answers.size(), false);
      log.add("judge", "provider_error", subject, e.what());
      break;
    } catch (const ParseError& e) {
      j.answer_verdicts[i] = false;
      log.add("judge", "parse_error", subject + "#" + std::to_string(i + 1), e.what());
    }
  }
  j.addressed = fold_aggregator(nugget.aggregator, j.answer_verdicts);
  return j;
}

JudgmentSet judge_reports(std::span<const Report> reports, std::span<const NuggetBank> banks,
                          providers::ChatProvider& provider, std::string judge_label, DiagnosticLog& log,
                          int parallelism) {
  std::map<std::string, const NuggetBank*> by_topic;
  for (const auto& b : banks)
    if (!by_topic.emplace(b.topic_id, &b).second) throw ContractError("two banks for topic " + b.topic_id);

  struct Task {
    const Report* report;
    const QANugget* nugget;
  };
  std::vector<Task> tasks;
  for (const auto& r : reports) {
    auto it = by_topic.find(r.topic_id);
    if (it == by_topic.end()) continue;
    for (const auto& n : it->second->selected) tasks.push_back({&r, &n});
  }
  std::vector<Judgment> results(tasks.size());
  parallel_for(tasks.size(), parallelism,
               [&](std::size_t i) { results[i] = judge_nugget(*tasks[i].report, *tasks[i].nugget, provider, log); });

  JudgmentSet set;
  set.judge_label = std::move(judge_label);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    JudgmentKey key{tasks[i].report->run_id, tasks[i].report->topic_id, tasks[i].nugget->nugget_id};
    if (!set.entries.emplace(key, results[i]).second)
      throw ContractError("duplicate report for run " + key.run_id + " topic " + key.topic_id);
  }
  return set;
}

double nugget_recall(std::string_view run_id, const NuggetBank& bank, const JudgmentSet& judgments) {
  if (bank.selected.empty()) throw ContractError("bank for topic " + bank.topic_id + " selects no nuggets");
  std::size_t hit = 0;
  for (const auto& n : bank.selected) {
    auto it = judgments.entries.find(JudgmentKey{std::string(run_id), bank.topic_id, n.nugget_id});
    if (it == judgments.entries.end())
      throw ContractError("no judgment for run " + std::string(run_id) + ", nugget " + n.nugget_id);
    hit += it->second.addressed;
  }
  return static_cast<double>(hit) / static_cast<double>(bank.selected.size());
}

double nugget_recall(const Report& report, const NuggetBank& bank, const JudgmentSet& judgments) {
  if (report.topic_id != bank.topic_id) throw ContractError("nugget_recall: report and bank topics differ");
  return nugget_recall(report.run_id, bank, judgments);
}

std::string_view to_string(MissingPolicy p) { return p == MissingPolicy::kZero ? "zero" : "skip"; }

MissingPolicy parse_missing_policy(std::string_view s) {
  if (s == "zero") return MissingPolicy::kZero;
  if (s == "skip") return MissingPolicy::kSkip;
  throw ContractError("unknown missing-topic policy '" + std::string(s) + "'");
}

const LeaderboardRow* Leaderboard::find(std::string_view run_id) const {
  for (const auto& r : rows)
    if (r.run_id == run_id) return &r;
  return nullptr;
}

ScoreMatrix Leaderboard::to_matrix() const {
  ScoreMatrix m;
  m.label = label;
  m.topic_ids = topic_ids;
  for (const auto& r : rows) {
    m.run_ids.push_back(r.run_id);
    std::vector<std::optional<double>> row;
    for (const auto& t : topic_ids) {
      auto it = r.per_topic.find(t);
      row.push_back(it == r.per_topic.end() ? std::nullopt : std::optional<double>(it->second));
    }
    m.scores.push_back(std::move(row));
  }
  return m;
}

namespace {

double mean_of(const std::map<std::string, double>& per_topic) {
  if (per_topic.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [_, v] : per_topic) s += v;
  return s / static_cast<double>(per_topic.size());
}

void sort_rows(std::vector<LeaderboardRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
    if (a.macro_recall != b.macro_recall) return a.macro_recall > b.macro_recall;
    return a.run_id < b.run_id;
  });
}

}  // namespace

void Leaderboard::check() const {
  std::set<std::string> seen;
  for (const auto& r : rows) {
    if (!seen.insert(r.run_id).second) throw ContractError("leaderboard: duplicate run " + r.run_id);
    if (std::abs(r.macro_recall - mean_of(r.per_topic)) > 1e-12)
      throw ContractError("leaderboard: macro of run " + r.run_id + " is not the mean of its topics");
    for (const auto& [t, v] : r.per_topic)
      if (!(v >= 0.0 && v <= 1.0)) throw ContractError("leaderboard: score out of [0,1] for " + r.run_id + "/" + t);
  }
}

Leaderboard leaderboard_from_scores(std::string label, std::vector<std::string> topic_ids,
                                    std::vector<LeaderboardRow> rows) {
  Leaderboard lb;
  lb.label = std::move(label);
  lb.topic_ids = std::move(topic_ids);
  for (auto& r : rows) r.macro_recall = mean_of(r.per_topic);
  sort_rows(rows);
  lb.rows = std::move(rows);
  return lb;
}

Leaderboard build_leaderboard(std::span<const Report> reports, std::span<const NuggetBank> banks,
                              const JudgmentSet& judgments, MissingPolicy policy, std::string label,
                              DiagnosticLog& log) {
  std::map<std::string, const NuggetBank*> by_topic;
  for (const auto& b : banks)
    if (!by_topic.emplace(b.topic_id, &b).second) throw ContractError("two banks for topic " + b.topic_id);
  std::set<std::pair<std::string, std::string>> submitted;
  std::set<std::string> runs;
  for (const auto& r : reports) {
    runs.insert(r.run_id);
    submitted.emplace(r.run_id, r.topic_id);
  }

  std::vector<LeaderboardRow> rows;
  for (const auto& run : runs) {
    LeaderboardRow row{run, 0.0, {}};
    int judged = 0;
    for (const auto& [topic, bank] : by_topic) {
      if (submitted.count({run, topic})) {
        row.per_topic[topic] = nugget_recall(run, *bank, judgments);
        ++judged;
      } else if (policy == MissingPolicy::kZero) {
        row.per_topic[topic] = 0.0;
      }
    }
    if (judged == 0) {
      log.add("leaderboard", "no_judged_topics", run, "run has no report for any bank topic");
      continue;
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::string> topics;
  std::vector<std::string> fps;
  for (const auto& [topic, bank] : by_topic) {
    topics.push_back(topic);
    fps.push_back(bank->config_fingerprint);
  }
  auto lb = leaderboard_from_scores(std::move(label), std::move(topics), std::move(rows));
  lb.judged_with = judgments.judge_label;
  lb.missing_policy = policy;
  Fingerprint fp;
  for (std::size_t i = 0; i < fps.size(); ++i) fp.add(lb.topic_ids[i], fps[i]);
  lb.bank_fingerprint = fp.hex();
  return lb;
}

std::string dump_leaderboard_csv(const Leaderboard& lb) {
  std::string out = "run_id,macro";
  for (const auto& t : lb.topic_ids) out += "," + io::csv_field(t);
  out += '\n';
  for (const auto& r : lb.rows) {
    out += io::csv_field(r.run_id) + "," + text::format_double(r.macro_recall);
    for (const auto& t : lb.topic_ids) {
      out += ',';
      auto it = r.per_topic.find(t);
      if (it != r.per_topic.end()) out += text::format_double(it->second);
    }
    out += '\n';
  }
  return out;
}

Leaderboard parse_leaderboard_csv(std::string_view content, std::string label) {
  Leaderboard lb;
  lb.label = std::move(label);
  bool header = false;
  io::for_each_line(content, [&](std::string_view line, std::size_t lineno) {
    auto cells = io::split_csv_line(line);
    if (!header) {
      if (cells.size() < 2 || cells[0] != "run_id" || cells[1] != "macro")
        throw FormatError("leaderboard csv: header must start with run_id,macro");
      lb.topic_ids.assign(cells.begin() + 2, cells.end());
      header = true;
      return;
    }
    if (cells.size() != lb.topic_ids.size() + 2)
      throw FormatError("leaderboard csv:" + std::to_string(lineno) + ": wrong cell count");
    LeaderboardRow row;
    row.run_id = cells[0];
    row.macro_recall = io::parse_double_strict(cells[1]);
    for (std::size_t i = 0; i < lb.topic_ids.size(); ++i)
      if (!cells[i + 2].empty()) row.per_topic[lb.topic_ids[i]] = io::parse_double_strict(cells[i + 2]);
    lb.rows.push_back(std::move(row));
  });
  if (!header) throw FormatError("leaderboard csv: missing header");
  sort_rows(lb.rows);
  try {
    lb.check();
  } catch (const ContractError& e) {
    throw FormatError(e.what());
  }
  return lb;
}

Leaderboard read_leaderboard_csv(const std::filesystem::path& path) {
  return parse_leaderboard_csv(io::read_file(path), path.stem() == "leaderboard" && path.has_parent_path()
                                                         ? path.parent_path().filename().string()
                                                         : path.stem().string());
}

Json leaderboard_json(const Leaderboard& lb) {
  Json rows = Json::array();
  for (const auto& r : lb.rows) {
    Json per = Json::object();
    for (const auto& [t, v] : r.per_topic) per[t] = v;
    rows.push_back(Json{{"run_id", r.run_id}, {"macro_recall", r.macro_recall}, {"per_topic", per}});
  }
  return Json{{"label", lb.label},
              {"judged_with", lb.judged_with},
              {"bank_fingerprint", lb.bank_fingerprint},
              {"missing_policy", std::string(to_string(lb.missing_policy))},
              {"topic_ids", lb.topic_ids},
              {"rows", rows}};
}

JudgmentFormat parse_judgment_format(std::string_view s) {
  if (s == "native") return JudgmentFormat::kNative;
  if (s == "argue_export") return JudgmentFormat::kArgueExport;
  throw ContractError("unknown judgment format '" + std::string(s) + "'");
}

AggregatorLookup aggregator_lookup(std::span<const NuggetBank> banks) {
  auto table = std::make_shared<std::map<std::pair<std::string, std::string>, Aggregator>>();
  for (const auto& b : banks)
    for (const auto& n : b.candidates) (*table)[{b.topic_id, n.nugget_id}] = n.aggregator;
  return [table](const std::string& topic, const std::string& nugget) -> std::optional<Aggregator> {
    auto it = table->find({topic, nugget});
    if (it == table->end()) return std::nullopt;
    return it->second;
  };
}

namespace {

bool boolean(const Json& j, const char* key) {
  const Json& v = io::json_field(j, key);
  if (!v.is_boolean()) throw FormatError(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

struct Row {
  std::string label;
  JudgmentKey key;
  Judgment judgment;
};

Row native_row(const Json& j) {
  Row r;
  r.label = j.contains("judge_label") ? io::json_string(j, "judge_label") : std::string("imported");
  r.key = {io::json_string(j, "run_id"), io::json_string(j, "topic_id"), io::json_string(j, "nugget_id")};
  if (auto it = j.find("answer_verdicts"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw FormatError("field 'answer_verdicts' must be an array");
    for (const auto& v : *it) {
      if (!v.is_boolean()) throw FormatError("answer_verdicts must hold booleans");
      r.judgment.answer_verdicts.push_back(v.get<bool>());
    }
  }
  r.judgment.addressed = boolean(j, "addressed");
  return r;
}

// Shape of a per-nugget judgment dump from an external judging system.
Row argue_row(const Json& j) {
  Row r;
  r.label = "argue_export";
  r.key = {io::json_string(j, "run_id"), io::json_string(j, "request_id"), io::json_string(j, "nugget_id")};
  if (auto it = j.find("answer_judgments"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw FormatError("field 'answer_judgments' must be an array");
    for (const auto& v : *it) {
      if (!v.is_string()) throw FormatError("answer_judgments must hold strings");
      auto s = text::to_lower(v.get<std::string>());
      if (s != "yes" && s != "no") throw FormatError("answer judgment must be YES or NO");
      r.judgment.answer_verdicts.push_back(s == "yes");
    }
  }
  r.judgment.addressed = boolean(j, "nugget_addressed");
  return r;
}

}  // namespace

JudgmentSet parse_judgments(std::string_view content, JudgmentFormat format, DiagnosticLog& log,
                            const AggregatorLookup& lookup, std::string_view source) {
  JudgmentSet set;
  std::size_t total = 0, bad = 0;
  std::optional<std::string> label;
  io::for_each_line(content, [&](std::string_view line, std::size_t lineno) {
    ++total;
    std::string where = std::string(source) + ":" + std::to_string(lineno);
    try {
      Json j = io::parse_json_line(line, source, lineno);
      if (!j.is_object()) throw FormatError("row is not an object");
      Row row = format == JudgmentFormat::kNative ? native_row(j) : argue_row(j);
      if (row.key.run_id.empty() || row.key.topic_id.empty() || row.key.nugget_id.empty())
        throw FormatError("empty identifier");
      if (!row.judgment.answer_verdicts.empty() && lookup) {
        if (auto agg = lookup(row.key.topic_id, row.key.nugget_id))
          row.judgment.addressed = fold_aggregator(*agg, row.judgment.answer_verdicts);
      }
      if (!label) label = row.label;
      if (!set.entries.emplace(row.key, row.judgment).second) throw FormatError("duplicate judgment key");
    } catch (const FormatError& e) {
      ++bad;
      log.add("import", "malformed_row", where, e.what());
    } catch (const Json::exception& e) {
      ++bad;
      log.add("import", "malformed_row", where, e.what());
    }
  });
  if (bad * 10 > total)
    throw FormatError(std::string(source) + ": " + std::to_string(bad) + " of " + std::to_string(total) +
                      " judgment rows are malformed");
  set.judge_label = label.value_or("imported");
  return set;
}

JudgmentSet import_judgments(const std::filesystem::path& path, JudgmentFormat format, DiagnosticLog& log,
                             const AggregatorLookup& lookup) {
  return parse_judgments(io::read_file(path), format, log, lookup, path.string());
}

}  // namespace nuggetkit::eval
