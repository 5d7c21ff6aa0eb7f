#include "doctest.h"
#include "factrl/completion.hpp"

using namespace factrl;

TEST_CASE("canonical completion parses as well formed") {
  auto p = parse_completion("<think>fluid seen</think><answer>yes</answer>");
  CHECK(p.well_formed);
  CHECK_FALSE(p.fallback_used);
  CHECK(p.think_text == "fluid seen");
  CHECK(p.answer_text == "yes");
}

TEST_CASE("whitespace outside the regions is tolerated") {
  auto p = parse_completion("  <think>a</think>\n\t<answer>no</answer>\n");
  CHECK(p.well_formed);
  CHECK(p.think_text == "a");
  CHECK(p.answer_text == "no");
}

TEST_CASE("non-whitespace outside the regions breaks the grammar") {
  auto p = parse_completion("ok <think>a</think><answer>no</answer>");
  CHECK_FALSE(p.well_formed);
  CHECK(p.fallback_used);
  // fallback still recovers the tagged contents
  CHECK(p.think_text == "a");
  CHECK(p.answer_text == "no");

  CHECK_FALSE(parse_completion("<think>a</think>x<answer>no</answer>").well_formed);
  CHECK_FALSE(parse_completion("<think>a</think><answer>no</answer>trailing").well_formed);
}

TEST_CASE("each tag must appear exactly once") {
  CHECK_FALSE(parse_completion("<think>a</think><think>b</think><answer>y</answer>").well_formed);
  CHECK_FALSE(parse_completion("<think>a</think><answer>y</answer><answer>n</answer>").well_formed);
  CHECK_FALSE(parse_completion("<think>a<answer>y</answer>").well_formed);
  CHECK_FALSE(parse_completion("<answer>y</answer>").well_formed);
}

TEST_CASE("regions must be ordered think then answer") {
  auto p = parse_completion("<answer>yes</answer><think>a</think>");
  CHECK_FALSE(p.well_formed);
}

TEST_CASE("missing closing think tag falls back") {
  auto p = parse_completion("<think>reasoning <answer>yes</answer>");
  CHECK_FALSE(p.well_formed);
  CHECK(p.fallback_used);
  CHECK(p.answer_text == "yes");
}

TEST_CASE("untagged text falls back to the raw string") {
  auto p = parse_completion("just some prose, answer yes");
  CHECK_FALSE(p.well_formed);
  CHECK(p.fallback_used);
  CHECK(p.think_text == "just some prose, answer yes");
  CHECK(p.answer_text == "just some prose, answer yes");
}

TEST_CASE("empty regions are still well formed") {
  auto p = parse_completion("<think></think><answer></answer>");
  CHECK(p.well_formed);
  CHECK(p.think_text.empty());
  CHECK(p.answer_text.empty());
}

TEST_CASE("binarize maps yes and no variants by first token") {
  CHECK(binarize("yes").value == 1);
  CHECK(binarize("no").value == 0);
  CHECK(binarize("Yes.").value == 1);
  CHECK(binarize("NO,").value == 0);
  CHECK(binarize("yes definitely").value == 1);
  CHECK(binarize("  no\tsign").value == 0);
}

TEST_CASE("binarize rejects everything else") {
  CHECK_FALSE(binarize("maybe").value.has_value());
  CHECK_FALSE(binarize("").value.has_value());
  CHECK_FALSE(binarize("yesterday").value.has_value());
  CHECK_FALSE(binarize("nope").value.has_value());
  CHECK_FALSE(binarize("definitely yes").value.has_value());
  CHECK(binarize("maybe").raw_token == "maybe");
}
