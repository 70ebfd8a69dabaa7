// Record formats: line-delimited JSON for every domain type, plus the CSV
// score matrix. Field names follow the domain types one-to-one.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nuggetkit/core.hpp"
#include "nuggetkit/errors.hpp"

namespace nuggetkit {

using Json = nlohmann::ordered_json;

void to_json(Json& j, const Persona& v);
void from_json(const Json& j, Persona& v);
void to_json(Json& j, const Topic& v);
void from_json(const Json& j, Topic& v);
void to_json(Json& j, const Document& v);
void from_json(const Json& j, Document& v);
void to_json(Json& j, const RankedDoc& v);
void from_json(const Json& j, RankedDoc& v);
void to_json(Json& j, const RetrievalRanking& v);
void from_json(const Json& j, RetrievalRanking& v);
void to_json(Json& j, const Answer& v);
void from_json(const Json& j, Answer& v);
void to_json(Json& j, const CandidateNugget& v);
void from_json(const Json& j, CandidateNugget& v);
void to_json(Json& j, const QualityVector& v);
void from_json(const Json& j, QualityVector& v);
void to_json(Json& j, const Provenance& v);
void from_json(const Json& j, Provenance& v);
void to_json(Json& j, const QANugget& v);
void from_json(const Json& j, QANugget& v);
void to_json(Json& j, const ReportSentence& v);
void from_json(const Json& j, ReportSentence& v);
void to_json(Json& j, const Report& v);
void from_json(const Json& j, Report& v);

}  // namespace nuggetkit

namespace nuggetkit::io {

std::string dump_line(const Json& j);

template <class T>
std::string dump_jsonl(std::span<const T> items) {
  std::string out;
  for (const auto& item : items) {
    out += dump_line(Json(item));
    out += '\n';
  }
  return out;
}

// Strict field access; all throw FormatError naming the field.
const Json& json_field(const Json& j, const char* key);
std::string json_string(const Json& j, const char* key);
double json_number(const Json& j, const char* key);
int json_int(const Json& j, const char* key);
const Json& json_array(const Json& j, const char* key);

/// Whole-string decimal parse; throws FormatError on trailing garbage.
double parse_double_strict(std::string_view s);

Json parse_json_line(std::string_view line, std::string_view source, std::size_t lineno);

/// Calls fn(trimmed_line, 1-based line number) for every non-blank line.
template <class Fn>
void for_each_line(std::string_view content, Fn&& fn) {
  std::size_t pos = 0, lineno = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    ++lineno;
    auto line = content.substr(pos, nl - pos);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (!line.empty()) fn(line, lineno);
    pos = nl + 1;
  }
}

template <class T>
std::vector<T> parse_jsonl(std::string_view content, std::string_view source = "<memory>") {
  std::vector<T> out;
  for_each_line(content, [&](std::string_view line, std::size_t lineno) {
    Json j = parse_json_line(line, source, lineno);
    try {
      out.push_back(j.get<T>());
    } catch (const std::exception& e) {
      throw FormatError(std::string(source) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return out;
}

/// Banks flattened to one nugget per line, each bank preceded by a header.
std::string dump_banks(std::span<const NuggetBank> banks);
std::vector<NuggetBank> parse_banks(std::string_view content, std::string_view source = "<memory>");

/// Native judgments: one line per (run_id, topic_id, nugget_id), ordered by key.
std::string dump_judgments(const JudgmentSet& set);

/// scores.csv: header `run_id,<topic_id...>,macro`; missing cells are empty.
std::string dump_scores_csv(const ScoreMatrix& m);
ScoreMatrix parse_scores_csv(std::string_view content, std::string label);

// CSV field helpers (RFC 4180 quoting).
std::string csv_field(std::string_view s);
std::vector<std::string> split_csv_line(std::string_view line);

// Files.
std::string read_file(const std::filesystem::path& path);
/// Write to a sibling temp file then rename over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  return parse_jsonl<T>(read_file(path), path.string());
}

template <class T>
void write_jsonl(const std::filesystem::path& path, std::span<const T> items) {
  write_file_atomic(path, dump_jsonl(items));
}

std::vector<NuggetBank> read_banks(const std::filesystem::path& path);

}  // namespace nuggetkit::io
