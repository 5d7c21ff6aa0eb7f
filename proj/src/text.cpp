#include "factrl/text.hpp"

namespace factrl::text {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

}  // namespace

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool is_ascii_punct(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return u > 0x20 && u < 0x7f && !is_word_char(c);
}

std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

std::string normalize(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char raw : s) {
    char c = raw >= 'A' && raw <= 'Z' ? static_cast<char>(raw - 'A' + 'a') : raw;
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  size_t begin = 0;
  size_t end = out.size();
  while (begin < end && (is_ascii_punct(out[begin]) || out[begin] == ' ')) ++begin;
  while (end > begin && (is_ascii_punct(out[end - 1]) || out[end - 1] == ' ')) --end;
  return out.substr(begin, end - begin);
}

bool contains_phrase(std::string_view t, std::string_view phrase) {
  if (phrase.empty() || phrase.size() > t.size()) return false;
  size_t pos = 0;
  while ((pos = t.find(phrase, pos)) != std::string_view::npos) {
    const bool left_ok = pos == 0 || !is_word_char(t[pos - 1]);
    const size_t after = pos + phrase.size();
    const bool right_ok = after == t.size() || !is_word_char(t[after]);
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

std::string first_token(std::string_view s) {
  size_t begin = 0;
  while (begin < s.size() && is_space(s[begin])) ++begin;
  size_t end = begin;
  while (end < s.size() && !is_space(s[end])) ++end;
  return std::string(s.substr(begin, end - begin));
}

std::string strip_trailing_punct(std::string token) {
  auto strippable = [](char c) {
    return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
  };
  while (!token.empty() && strippable(token.back())) token.pop_back();
  return token;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace factrl::text
