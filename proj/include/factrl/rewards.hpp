#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "factrl/completion.hpp"
#include "factrl/dataset.hpp"
#include "factrl/judge.hpp"

namespace factrl {

struct RewardMask {
  bool acc_on = true;
  bool format_on = true;
  bool fact_on = true;
  bool cons_on = true;

  int enabled_count() const {
    return (acc_on ? 1 : 0) + (format_on ? 1 : 0) + (fact_on ? 1 : 0) + (cons_on ? 1 : 0);
  }
  std::string describe() const;

  static RewardMask all() { return {}; }
  static RewardMask acc_format() { return {true, true, false, false}; }
  static RewardMask acc_format_fact() { return {true, true, true, false}; }
};

struct RewardVector {
  double acc = 0.0;
  double format = 0.0;
  double fact = 0.0;
  double cons = 0.0;
  double total = 0.0;
  RewardMask mask;
};

// 1.0 iff the answer binarizes and equals the reference label.
double accuracy_reward(const ParsedCompletion& completion, int reference_label);

// 1.0 iff the raw text satisfies the completion grammar.
double format_reward(std::string_view raw);

// 0.2 per distinct concept whose surface form or any synonym occurs
// (word-bounded) in the completion text, clamped to 1.0. Well-formed
// completions are searched over think + answer contents, anything else over
// the raw text. Throws on an empty concept list.
double fact_reward(std::string_view raw, const std::vector<ConceptEntry>& concepts);

// 1.0 for a consistent verdict, -0.5 otherwise.
double consistency_reward(const ParsedCompletion& completion, const JudgeVerdict& verdict);

// Mean of the enabled components; disabled ones stay 0 and are excluded from
// the normalization count. Accuracy is referenced against pseudo_label.
// verdict must be non-null iff cons_on.
RewardVector total_reward(std::string_view raw, const QARecord& record,
                          const RewardMask& mask, const JudgeVerdict* verdict);

}  // namespace factrl
