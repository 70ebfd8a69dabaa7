#include "nuggetkit/serialize.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

#include "nuggetkit/errors.hpp"
#include "nuggetkit/text.hpp"

namespace nuggetkit {

namespace {

using io::json_array;
using io::json_field;
using io::json_int;
using io::json_number;
using io::json_string;

const Json& field(const Json& j, const char* key) { return json_field(j, key); }
std::string str(const Json& j, const char* key) { return json_string(j, key); }
double num(const Json& j, const char* key) { return json_number(j, key); }
int integer(const Json& j, const char* key) { return json_int(j, key); }
const Json& array(const Json& j, const char* key) { return json_array(j, key); }

}  // namespace

void to_json(Json& j, const Persona& v) {
  j = Json{{"goal", v.goal},
           {"background", v.background},
           {"role", v.role},
           {"communication", v.communication},
           {"scope", v.scope}};
}

void from_json(const Json& j, Persona& v) {
  v.goal = str(j, "goal");
  v.background = str(j, "background");
  v.role = str(j, "role");
  v.communication = str(j, "communication");
  v.scope = str(j, "scope");
}

void to_json(Json& j, const Topic& v) {
  j = Json{{"topic_id", v.topic_id}, {"title", v.title}, {"request_text", v.request_text}};
  j["persona"] = v.persona ? Json(*v.persona) : Json(nullptr);
}

void from_json(const Json& j, Topic& v) {
  v.topic_id = str(j, "topic_id");
  v.title = j.contains("title") ? str(j, "title") : std::string();
  v.request_text = str(j, "request_text");
  auto it = j.find("persona");
  if (it != j.end() && !it->is_null())
    v.persona = it->get<Persona>();
  else
    v.persona.reset();
}

void to_json(Json& j, const Document& v) {
  j = Json{{"doc_id", v.doc_id}, {"lang", v.lang}, {"text", v.text}};
}

void from_json(const Json& j, Document& v) {
  v.doc_id = str(j, "doc_id");
  v.lang = str(j, "lang");
  v.text = str(j, "text");
}

void to_json(Json& j, const RankedDoc& v) {
  j = Json{{"doc_id", v.doc_id}, {"rank", v.rank}, {"score", v.score}};
}

void from_json(const Json& j, RankedDoc& v) {
  v.doc_id = str(j, "doc_id");
  v.rank = integer(j, "rank");
  v.score = num(j, "score");
}

void to_json(Json& j, const RetrievalRanking& v) {
  j = Json{{"topic_id", v.topic_id}, {"entries", v.entries}};
}

void from_json(const Json& j, RetrievalRanking& v) {
  v.topic_id = str(j, "topic_id");
  v.entries.clear();
  for (const auto& e : array(j, "entries")) v.entries.push_back(e.get<RankedDoc>());
}

void to_json(Json& j, const Answer& v) {
  j = Json{{"text", v.text}, {"doc_ids", Json(std::vector<std::string>(v.doc_ids.begin(), v.doc_ids.end()))}};
}

void from_json(const Json& j, Answer& v) {
  v.text = str(j, "text");
  v.doc_ids.clear();
  for (const auto& d : array(j, "doc_ids")) {
    if (!d.is_string()) throw FormatError("doc_ids entries must be strings");
    v.doc_ids.insert(d.get<std::string>());
  }
}

void to_json(Json& j, const CandidateNugget& v) {
  j = Json{{"nugget_id", v.nugget_id},
           {"topic_id", v.topic_id},
           {"question", v.question},
           {"answers", v.answers},
           {"source_doc_id", v.source_doc_id}};
}

void from_json(const Json& j, CandidateNugget& v) {
  v.nugget_id = str(j, "nugget_id");
  v.topic_id = str(j, "topic_id");
  v.question = str(j, "question");
  v.answers.clear();
  for (const auto& a : array(j, "answers")) v.answers.push_back(a.get<Answer>());
  v.source_doc_id = str(j, "source_doc_id");
}

void to_json(Json& j, const QualityVector& v) {
  j = Json::object();
  const auto& table = criteria_table();
  for (std::size_t i = 0; i < kNumCriteria; ++i) j[std::string(table[i].name)] = v.values[i];
}

void from_json(const Json& j, QualityVector& v) {
  if (!j.is_object()) throw FormatError("criteria must be an object");
  const auto& table = criteria_table();
  for (std::size_t i = 0; i < kNumCriteria; ++i) v.values[i] = num(j, std::string(table[i].name).c_str());
}

void to_json(Json& j, const Provenance& v) {
  j = Json{{"member_question_texts", v.member_question_texts},
           {"cluster_size", v.cluster_size},
           {"grounding_doc_count", v.grounding_doc_count}};
  j["criteria"] = v.criteria ? Json(*v.criteria) : Json(nullptr);
  j["selection_method"] = std::string(to_string(v.selection_method));
  j["selection_rank"] = v.selection_rank ? Json(*v.selection_rank) : Json(nullptr);
}

void from_json(const Json& j, Provenance& v) {
  v.member_question_texts.clear();
  for (const auto& q : array(j, "member_question_texts")) {
    if (!q.is_string()) throw FormatError("member_question_texts entries must be strings");
    v.member_question_texts.push_back(q.get<std::string>());
  }
  v.cluster_size = integer(j, "cluster_size");
  v.grounding_doc_count = integer(j, "grounding_doc_count");
  auto c = j.find("criteria");
  if (c != j.end() && !c->is_null())
    v.criteria = c->get<QualityVector>();
  else
    v.criteria.reset();
  v.selection_method = parse_selection_method(str(j, "selection_method"));
  auto r = j.find("selection_rank");
  if (r != j.end() && !r->is_null())
    v.selection_rank = integer(j, "selection_rank");
  else
    v.selection_rank.reset();
}

void to_json(Json& j, const QANugget& v) {
  j = Json{{"nugget_id", v.nugget_id},
           {"topic_id", v.topic_id},
           {"question", v.question},
           {"aggregator", std::string(to_string(v.aggregator))},
           {"answers", v.answers},
           {"provenance", v.provenance}};
}

void from_json(const Json& j, QANugget& v) {
  v.nugget_id = str(j, "nugget_id");
  v.topic_id = str(j, "topic_id");
  v.question = str(j, "question");
  v.aggregator = parse_aggregator(str(j, "aggregator"));
  v.answers.clear();
  for (const auto& a : array(j, "answers")) v.answers.push_back(a.get<Answer>());
  v.provenance = field(j, "provenance").get<Provenance>();
}

void to_json(Json& j, const ReportSentence& v) {
  j = Json{{"text", v.text}, {"citations", v.citations}};
}

void from_json(const Json& j, ReportSentence& v) {
  v.text = str(j, "text");
  v.citations.clear();
  auto it = j.find("citations");
  if (it != j.end())
    for (const auto& c : *it) v.citations.push_back(c.get<std::string>());
}

void to_json(Json& j, const Report& v) {
  j = Json{{"run_id", v.run_id}, {"topic_id", v.topic_id}, {"sentences", v.sentences}};
}

void from_json(const Json& j, Report& v) {
  v.run_id = str(j, "run_id");
  v.topic_id = str(j, "topic_id");
  v.sentences.clear();
  for (const auto& s : array(j, "sentences")) v.sentences.push_back(s.get<ReportSentence>());
}

}  // namespace nuggetkit

namespace nuggetkit::io {

std::string dump_line(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace); }

const Json& json_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string("missing field '") + key + "'");
  return *it;
}

std::string json_string(const Json& j, const char* key) {
  const Json& v = json_field(j, key);
  if (!v.is_string()) throw FormatError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

double json_number(const Json& j, const char* key) {
  const Json& v = json_field(j, key);
  if (!v.is_number()) throw FormatError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

int json_int(const Json& j, const char* key) {
  const Json& v = json_field(j, key);
  if (!v.is_number_integer()) throw FormatError(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

const Json& json_array(const Json& j, const char* key) {
  const Json& v = json_field(j, key);
  if (!v.is_array()) throw FormatError(std::string("field '") + key + "' must be an array");
  return v;
}

Json parse_json_line(std::string_view line, std::string_view source, std::size_t lineno) {
  try {
    return Json::parse(line);
  } catch (const Json::exception& e) {
    throw FormatError(std::string(source) + ":" + std::to_string(lineno) + ": " + e.what());
  }
}


std::string dump_banks(std::span<const NuggetBank> banks) {
  std::string out;
  for (const auto& bank : banks) {
    Json header{{"record", "bank"},
                {"topic_id", bank.topic_id},
                {"method", std::string(to_string(bank.method))},
                {"config_fingerprint", bank.config_fingerprint},
                {"selected_count", bank.selected.size()},
                {"candidate_count", bank.candidates.size()}};
    out += dump_line(header);
    out += '\n';
    for (const auto& n : bank.candidates) {
      Json line{{"record", "nugget"}};
      const Json body(n);
      for (auto& [k, v] : body.items()) line[k] = v;
      out += dump_line(line);
      out += '\n';
    }
  }
  return out;
}

std::vector<NuggetBank> parse_banks(std::string_view content, std::string_view source) {
  std::vector<NuggetBank> banks;
  std::size_t expected_selected = 0, expected_candidates = 0;
  auto finish = [&](std::size_t lineno) {
    if (banks.empty()) return;
    auto& b = banks.back();
    if (b.candidates.size() != expected_candidates)
      throw FormatError(std::string(source) + ":" + std::to_string(lineno) + ": bank " + b.topic_id +
                        " declares " + std::to_string(expected_candidates) + " candidates, found " +
                        std::to_string(b.candidates.size()));
    for (const auto& c : b.candidates)
      if (c.provenance.selection_rank) b.selected.push_back(c);
    std::stable_sort(b.selected.begin(), b.selected.end(), [](const QANugget& x, const QANugget& y) {
      return *x.provenance.selection_rank < *y.provenance.selection_rank;
    });
    if (b.selected.size() != expected_selected)
      throw FormatError(std::string(source) + ": bank " + b.topic_id + " selected count mismatch");
  };
  std::size_t last_line = 0;
  for_each_line(content, [&](std::string_view line, std::size_t lineno) {
    last_line = lineno;
    Json j = parse_json_line(line, source, lineno);
    try {
      std::string record = str(j, "record");
      if (record == "bank") {
        finish(lineno);
        NuggetBank b;
        b.topic_id = str(j, "topic_id");
        b.method = parse_selection_method(str(j, "method"));
        b.config_fingerprint = str(j, "config_fingerprint");
        expected_selected = static_cast<std::size_t>(integer(j, "selected_count"));
        expected_candidates = static_cast<std::size_t>(integer(j, "candidate_count"));
        banks.push_back(std::move(b));
      } else if (record == "nugget") {
        if (banks.empty()) throw FormatError("nugget line before any bank header");
        banks.back().candidates.push_back(j.get<QANugget>());
      } else {
        throw FormatError("unknown record kind '" + record + "'");
      }
    } catch (const FormatError& e) {
      throw FormatError(std::string(source) + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Json::exception& e) {
      throw FormatError(std::string(source) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  finish(last_line);
  return banks;
}

std::string dump_judgments(const JudgmentSet& set) {
  std::string out;
  for (const auto& [key, j] : set.entries) {
    Json line{{"judge_label", set.judge_label},
              {"run_id", key.run_id},
              {"topic_id", key.topic_id},
              {"nugget_id", key.nugget_id},
              {"answer_verdicts", Json(std::vector<bool>(j.answer_verdicts))},
              {"addressed", j.addressed}};
    out += dump_line(line);
    out += '\n';
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  out.push_back(std::move(cur));
  return out;
}

std::string dump_scores_csv(const ScoreMatrix& m) {
  m.check();
  std::string out = "run_id";
  for (const auto& t : m.topic_ids) out += "," + csv_field(t);
  out += ",macro\n";
  for (std::size_t r = 0; r < m.run_ids.size(); ++r) {
    out += csv_field(m.run_ids[r]);
    for (const auto& v : m.scores[r]) {
      out += ',';
      if (v) out += text::format_double(*v);
    }
    out += ',';
    if (auto mean = m.row_mean(r)) out += text::format_double(*mean);
    out += '\n';
  }
  return out;
}

double parse_double_strict(std::string_view s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError("bad number '" + std::string(s) + "'");
  return v;
}

ScoreMatrix parse_scores_csv(std::string_view content, std::string label) {
  ScoreMatrix m;
  m.label = std::move(label);
  bool header_seen = false;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl + 1;
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (!header_seen) {
      if (cells.size() < 2 || cells.front() != "run_id" || cells.back() != "macro")
        throw FormatError("scores.csv: header must be run_id,<topics...>,macro");
      m.topic_ids.assign(cells.begin() + 1, cells.end() - 1);
      header_seen = true;
      continue;
    }
    if (cells.size() != m.topic_ids.size() + 2)
      throw FormatError("scores.csv:" + std::to_string(lineno) + ": wrong cell count");
    m.run_ids.push_back(cells[0]);
    std::vector<std::optional<double>> row;
    for (std::size_t i = 1; i + 1 < cells.size(); ++i) {
      if (cells[i].empty())
        row.emplace_back(std::nullopt);
      else
        row.emplace_back(parse_double_strict(cells[i]));
    }
    m.scores.push_back(std::move(row));
  }
  if (!header_seen) throw FormatError("scores.csv: missing header");
  try {
    m.check();
  } catch (const ContractError& e) {
    throw FormatError(std::string("scores.csv: ") + e.what());
  }
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  static std::atomic<unsigned long> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
         std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NuggetBank> read_banks(const std::filesystem::path& path) {
  return parse_banks(read_file(path), path.string());
}

}  // namespace nuggetkit::io
