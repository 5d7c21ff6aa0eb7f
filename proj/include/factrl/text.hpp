#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace factrl::text {

// ASCII [a-zA-Z0-9]; everything else (including '_') is a word boundary.
bool is_word_char(char c);

bool is_ascii_punct(char c);

std::string to_lower(std::string_view s);

// Canonical text form shared by concept matching and the data loader:
// lowercase, whitespace runs collapsed to single spaces, leading/trailing
// punctuation and whitespace stripped.
std::string normalize(std::string_view s);

// Word-boundary containment of `phrase` in `text`. Both sides are expected
// to be normalized already. Empty phrases never match.
bool contains_phrase(std::string_view text, std::string_view phrase);

// First whitespace-delimited token, or "" when there is none.
std::string first_token(std::string_view s);

// Strips trailing characters from the set .,!?;:
std::string strip_trailing_punct(std::string token);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace factrl::text
