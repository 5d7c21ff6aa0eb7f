#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace factrl {

// Structured completion grammar: exactly one <think>...</think> region
// followed by exactly one <answer>...</answer> region, with nothing but
// whitespace outside the two regions.
struct ParsedCompletion {
  std::string think_text;
  std::string answer_text;
  bool well_formed = false;
  bool fallback_used = false;
};

struct BinarizedAnswer {
  std::optional<int> value;  // 1 = yes, 0 = no, absent otherwise
  std::string raw_token;
};

// Total over arbitrary text. When the grammar is violated, fallback
// extraction pulls the first <answer>/<think> pair if one exists, otherwise
// the entire raw text.
ParsedCompletion parse_completion(std::string_view raw);

// First whitespace-delimited token, lowercased, trailing .,!?;: stripped,
// compared against "yes"/"no".
BinarizedAnswer binarize(std::string_view answer_text);

}  // namespace factrl
