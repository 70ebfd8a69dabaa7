#include "nuggetkit/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <system_error>

namespace nuggetkit::text {

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }
bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

}  // namespace

std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string normalize(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : trim(s)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
  }
  return out;
}

std::string normalize_loose(std::string_view s) {
  std::string n = normalize(s);
  std::size_t b = 0, e = n.size();
  while (b < e && (is_ascii_punct(n[b]) || is_space(n[b]))) ++b;
  while (e > b && (is_ascii_punct(n[e - 1]) || is_space(n[e - 1]))) --e;
  return n.substr(b, e - b);
}

std::string strip_punctuation(std::string_view s) {
  std::string tmp;
  tmp.reserve(s.size());
  for (unsigned char c : s) tmp.push_back(is_ascii_punct(c) ? ' ' : static_cast<char>(c));
  return normalize(tmp);
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (is_word_byte(c)) {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> sentences(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    auto piece = trim(s.substr(start, end - start));
    if (!piece.empty()) out.emplace_back(piece);
    start = end;
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    unsigned char c = s[i];
    std::size_t term_len = 0;
    if (c == '.' || c == '!' || c == '?') {
      term_len = 1;
    } else if (c == 0xE3 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
               static_cast<unsigned char>(s[i + 2]) == 0x82) {
      term_len = 3;  // U+3002 ideographic full stop
    } else if (c == 0xEF && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0xBC &&
               (static_cast<unsigned char>(s[i + 2]) == 0x9F || static_cast<unsigned char>(s[i + 2]) == 0x81)) {
      term_len = 3;  // full-width ? and !
    }
    if (term_len == 0) continue;
    std::size_t j = i + term_len;
    while (j < s.size() && (s[j] == '.' || s[j] == '!' || s[j] == '?' || s[j] == '"' || s[j] == '\'' || s[j] == ')')) ++j;
    if (j == s.size() || is_space(s[j]) || term_len == 3) {
      flush(j);
      i = j - 1;
    }
  }
  flush(s.size());
  return out;
}

int syllables(std::string_view word) {
  std::string w = to_lower(word);
  w.erase(std::remove_if(w.begin(), w.end(), [](char c) { return !std::isalpha(static_cast<unsigned char>(c)); }),
          w.end());
  if (w.empty()) return 1;
  auto vowel = [](char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y'; };
  int count = 0;
  bool prev = false;
  for (char c : w) {
    bool v = vowel(c);
    if (v && !prev) ++count;
    prev = v;
  }
  if (w.size() > 2 && w.back() == 'e' && !vowel(w[w.size() - 2]) && !(w.size() > 3 && w.ends_with("le")))
    --count;
  return std::max(count, 1);
}

double edit_similarity(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  double dist = static_cast<double>(prev[b.size()]);
  return 1.0 - dist / static_cast<double>(std::max(a.size(), b.size()));
}

std::vector<std::string> chunk(std::string_view s, std::size_t max_bytes) {
  std::vector<std::string> out;
  if (max_bytes == 0 || s.size() <= max_bytes) {
    out.emplace_back(s);
    return out;
  }
  std::size_t pos = 0;
  while (pos < s.size()) {
    if (s.size() - pos <= max_bytes) {
      out.emplace_back(s.substr(pos));
      break;
    }
    std::size_t end = pos + max_bytes;
    // never cut inside a UTF-8 sequence
    while (end > pos && (static_cast<unsigned char>(s[end]) & 0xC0) == 0x80) --end;
    std::size_t ws = end;
    while (ws > pos + max_bytes / 2 && !is_space(s[ws - 1])) --ws;
    if (ws > pos + max_bytes / 2) end = ws;
    if (end == pos) end = pos + max_bytes;
    std::size_t stop = end;
    while (stop > pos && is_space(s[stop - 1])) --stop;
    if (stop > pos) out.emplace_back(s.substr(pos, stop - pos));
    pos = end;
    while (pos < s.size() && is_space(s[pos])) ++pos;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  return true;
}

std::string numbered_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

std::vector<std::string> parse_numbered_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    auto nl = s.find('\n', pos);
    if (nl == std::string_view::npos) nl = s.size();
    auto line = trim(s.substr(pos, nl - pos));
    pos = nl + 1;
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == 0 || i + 1 >= line.size() || line[i] != '.' || line[i + 1] != ' ') continue;
    out.emplace_back(trim(line.substr(i + 2)));
  }
  return out;
}

}  // namespace nuggetkit::text
