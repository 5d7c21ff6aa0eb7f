#include <string>
#include <vector>

#include "doctest.h"
#include "factrl/completion.hpp"
#include "factrl/judge.hpp"
#include "factrl/rewards.hpp"

using namespace factrl;

namespace {

std::vector<ConceptEntry> radiology_concepts() {
  return {{"lung infection", {"pneumonia"}}, {"congestion", {}}, {"chest radiography", {"chest x-ray"}}};
}

QARecord make_record(int pseudo) {
  QARecord r;
  r.id = "r1";
  r.question = "any signs of lung infection or congestion?";
  r.pseudo_label = pseudo;
  r.concepts = radiology_concepts();
  return r;
}

}  // namespace

TEST_CASE("accuracy is exact match on the binarized answer") {
  auto yes = parse_completion("<think>t</think><answer>yes</answer>");
  auto no = parse_completion("<think>t</think><answer>no</answer>");
  CHECK(accuracy_reward(yes, 1) == 1.0);
  CHECK(accuracy_reward(yes, 0) == 0.0);
  CHECK(accuracy_reward(no, 0) == 1.0);
  CHECK(accuracy_reward(no, 1) == 0.0);
}

TEST_CASE("unparseable answers earn no accuracy") {
  auto vague = parse_completion("<think>t</think><answer>possibly</answer>");
  CHECK(accuracy_reward(vague, 1) == 0.0);
  CHECK(accuracy_reward(vague, 0) == 0.0);
}

TEST_CASE("accuracy rejects references outside {0,1}") {
  auto yes = parse_completion("<think>t</think><answer>yes</answer>");
  CHECK_THROWS(accuracy_reward(yes, 2));
  CHECK_THROWS(accuracy_reward(yes, -1));
}

TEST_CASE("format reward is the grammar verdict") {
  CHECK(format_reward("<think>a</think><answer>yes</answer>") == 1.0);
  CHECK(format_reward(" <think>a</think> <answer>yes</answer> ") == 1.0);
  CHECK(format_reward("<think>a</think>x<answer>yes</answer>") == 0.0);
  CHECK(format_reward("<think>a<answer>yes</answer>") == 0.0);
  CHECK(format_reward("<think>a</think><answer>yes</answer><answer>no</answer>") == 0.0);
  CHECK(format_reward("no tags at all") == 0.0);
}

TEST_CASE("fact reward pays 0.2 per distinct concept") {
  const auto concepts = radiology_concepts();
  // two of three concepts mentioned
  CHECK(fact_reward("<think>signs of lung infection with congestion</think><answer>yes</answer>",
                    concepts) == 0.4);
  // all three; compare against the same product the scorer forms
  CHECK(fact_reward("<think>chest radiography shows lung infection and congestion</think>"
                    "<answer>yes</answer>",
                    concepts) == 0.2 * 3.0);
  // none
  CHECK(fact_reward("<think>clear</think><answer>no</answer>", concepts) == 0.0);
}

TEST_CASE("repeated concepts are counted once") {
  const auto concepts = radiology_concepts();
  CHECK(fact_reward("<think>congestion, severe congestion, congestion again</think>"
                    "<answer>yes</answer>",
                    concepts) == 0.2);
}

TEST_CASE("synonyms credit their concept but never double count") {
  const auto concepts = radiology_concepts();
  CHECK(fact_reward("<think>pneumonia likely</think><answer>yes</answer>", concepts) == 0.2);
  CHECK(fact_reward("<think>pneumonia, and lung infection</think><answer>yes</answer>",
                    concepts) == 0.2);
}

TEST_CASE("fact reward clamps at 1.0") {
  std::vector<ConceptEntry> six;
  std::string think = "<think>";
  for (int i = 0; i < 6; ++i) {
    std::string name = "marker_" + std::to_string(i);
    six.push_back({name, {}});
    think += name + " ";
  }
  think += "</think><answer>yes</answer>";
  CHECK(fact_reward(think, six) == 1.0);
}

TEST_CASE("word boundaries protect concept matching") {
  std::vector<ConceptEntry> concepts = {{"concept_1", {}}};
  CHECK(fact_reward("<think>concept_1 seen</think><answer>yes</answer>", concepts) == 0.2);
  CHECK(fact_reward("<think>concept_12 seen</think><answer>yes</answer>", concepts) == 0.0);
}

TEST_CASE("well-formed completions are searched in think and answer only") {
  std::vector<ConceptEntry> concepts = {{"congestion", {}}};
  // concept named only in the answer region still counts
  CHECK(fact_reward("<think>see below</think><answer>yes, congestion</answer>", concepts) == 0.2);
  // malformed output falls back to searching the raw text
  CHECK(fact_reward("raw mention of congestion without tags", concepts) == 0.2);
}

TEST_CASE("fact reward refuses a record without concepts") {
  CHECK_THROWS(fact_reward("<think>a</think><answer>yes</answer>", {}));
}

TEST_CASE("consistency maps the verdict to 1.0 or -0.5") {
  auto parsed = parse_completion("<think>presence of congestion</think><answer>yes</answer>");
  JudgeVerdict ok{true, "", VerdictSource::local_rule};
  JudgeVerdict bad{false, "", VerdictSource::local_rule};
  CHECK(consistency_reward(parsed, ok) == 1.0);
  CHECK(consistency_reward(parsed, bad) == -0.5);
}

TEST_CASE("total reward averages the enabled components") {
  QARecord r = make_record(1);
  const std::string raw = "<think>presence of lung infection, congestion</think><answer>yes</answer>";
  JudgeVerdict ok{true, "", VerdictSource::local_rule};

  RewardMask all = RewardMask::all();
  RewardVector v = total_reward(raw, r, all, &ok);
  CHECK(v.acc == 1.0);
  CHECK(v.format == 1.0);
  CHECK(v.fact == 0.4);
  CHECK(v.cons == 1.0);
  CHECK(v.total == (1.0 + 1.0 + 0.4 + 1.0) / 4.0);

  RewardMask af = RewardMask::acc_format();
  RewardVector w = total_reward(raw, r, af, nullptr);
  CHECK(w.total == 1.0);

  RewardMask aff = RewardMask::acc_format_fact();
  RewardVector u = total_reward(raw, r, aff, nullptr);
  CHECK(u.total == (1.0 + 1.0 + 0.4) / 3.0);
}

TEST_CASE("accuracy inside total compares against the pseudo label") {
  QARecord r = make_record(0);
  const std::string raw = "<think>presence of congestion</think><answer>yes</answer>";
  RewardVector v = total_reward(raw, r, RewardMask::acc_format(), nullptr);
  CHECK(v.acc == 0.0);
}

TEST_CASE("total reward rejects impossible masks") {
  QARecord r = make_record(1);
  const std::string raw = "<think>a</think><answer>yes</answer>";
  RewardMask none{false, false, false, false};
  CHECK_THROWS(total_reward(raw, r, none, nullptr));
  CHECK_THROWS(total_reward(raw, r, RewardMask::all(), nullptr));  // cons without verdict
}

TEST_CASE("mask descriptions are canonical") {
  CHECK(RewardMask::all().describe() == "acc+format+fact+cons");
  CHECK(RewardMask::acc_format().describe() == "acc+format");
  CHECK(RewardMask::acc_format_fact().describe() == "acc+format+fact");
  CHECK(RewardMask{false, false, false, false}.describe() == "none");
  CHECK(RewardMask::all().enabled_count() == 4);
  CHECK(RewardMask::acc_format().enabled_count() == 2);
}
