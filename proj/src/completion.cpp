#include "factrl/completion.hpp"

#include "factrl/text.hpp"

namespace factrl {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

size_t count_occurrences(std::string_view s, std::string_view needle) {
  size_t count = 0;
  size_t pos = 0;
  while ((pos = s.find(needle, pos)) != std::string_view::npos) {
    ++count;
    pos += 1;
  }
  return count;
}

bool all_whitespace(std::string_view s) {
  for (char c : s) {
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '\v' && c != '\f') {
      return false;
    }
  }
  return true;
}

// Content of the first open...close pair, if any.
std::optional<std::string> first_pair_content(std::string_view s,
                                              std::string_view open,
                                              std::string_view close) {
  size_t o = s.find(open);
  if (o == std::string_view::npos) return std::nullopt;
  size_t c = s.find(close, o + open.size());
  if (c == std::string_view::npos) return std::nullopt;
  return std::string(s.substr(o + open.size(), c - o - open.size()));
}

}  // namespace

ParsedCompletion parse_completion(std::string_view raw) {
  ParsedCompletion out;

  const bool counts_ok = count_occurrences(raw, kThinkOpen) == 1 &&
                         count_occurrences(raw, kThinkClose) == 1 &&
                         count_occurrences(raw, kAnswerOpen) == 1 &&
                         count_occurrences(raw, kAnswerClose) == 1;
  if (counts_ok) {
    const size_t to = raw.find(kThinkOpen);
    const size_t tc = raw.find(kThinkClose);
    const size_t ao = raw.find(kAnswerOpen);
    const size_t ac = raw.find(kAnswerClose);
    const bool ordered = to < tc && tc + kThinkClose.size() <= ao && ao < ac;
    if (ordered && tc >= to + kThinkOpen.size() && ac >= ao + kAnswerOpen.size()) {
      const bool outside_ws =
          all_whitespace(raw.substr(0, to)) &&
          all_whitespace(raw.substr(tc + kThinkClose.size(),
                                    ao - tc - kThinkClose.size())) &&
          all_whitespace(raw.substr(ac + kAnswerClose.size()));
      if (outside_ws) {
        out.well_formed = true;
        out.think_text = std::string(raw.substr(to + kThinkOpen.size(),
                                                tc - to - kThinkOpen.size()));
        out.answer_text = std::string(raw.substr(ao + kAnswerOpen.size(),
                                                 ac - ao - kAnswerOpen.size()));
        return out;
      }
    }
  }

  out.well_formed = false;
  out.fallback_used = true;
  auto think = first_pair_content(raw, kThinkOpen, kThinkClose);
  auto answer = first_pair_content(raw, kAnswerOpen, kAnswerClose);
  out.think_text = think ? *think : std::string(raw);
  out.answer_text = answer ? *answer : std::string(raw);
  return out;
}

BinarizedAnswer binarize(std::string_view answer_text) {
  BinarizedAnswer out;
  std::string token = text::first_token(answer_text);
  token = text::to_lower(token);
  token = text::strip_trailing_punct(std::move(token));
  out.raw_token = token;
  if (token == "yes") {
    out.value = 1;
  } else if (token == "no") {
    out.value = 0;
  }
  return out;
}

}  // namespace factrl
