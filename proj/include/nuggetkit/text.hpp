// Small text helpers shared by the stages. ASCII-only case folding; bytes
// >= 0x80 pass through untouched so UTF-8 text is never split mid-sequence.
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace nuggetkit::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
/// Lowercase, collapse runs of whitespace to one space, trim.
std::string normalize(std::string_view s);
/// normalize() plus removal of leading/trailing ASCII punctuation.
std::string normalize_loose(std::string_view s);
/// Drop all ASCII punctuation, then normalize().
std::string strip_punctuation(std::string_view s);

/// Word tokens: maximal runs of ASCII alphanumerics or non-ASCII bytes,
/// lowercased.
std::vector<std::string> words(std::string_view s);
/// Sentences split at '.', '!', '?' (and their CJK full-width forms) followed
/// by whitespace or end of text. Never returns empty sentences.
std::vector<std::string> sentences(std::string_view s);
/// Heuristic English syllable count for one word (>= 1).
int syllables(std::string_view word);

/// Similarity in [0,1] from Levenshtein distance over bytes.
double edit_similarity(std::string_view a, std::string_view b);

/// Split into chunks of at most `max_bytes`, preferring whitespace boundaries
/// and never cutting a UTF-8 sequence.
std::vector<std::string> chunk(std::string_view s, std::size_t max_bytes);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

bool starts_with_ci(std::string_view s, std::string_view prefix);

/// "1. a\n2. b" layout used for list-valued prompt variables.
std::string numbered_list(const std::vector<std::string>& items);
/// Inverse of numbered_list; lines without a "N. " prefix are skipped.
std::vector<std::string> parse_numbered_list(std::string_view s);

}  // namespace nuggetkit::text
