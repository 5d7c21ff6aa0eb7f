#include "factrl/rewards.hpp"

#include <stdexcept>

#include "factrl/text.hpp"

namespace factrl {

std::string RewardMask::describe() const {
  std::string out;
  auto add = [&out](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(acc_on, "acc");
  add(format_on, "format");
  add(fact_on, "fact");
  add(cons_on, "cons");
  return out.empty() ? "none" : out;
}

double accuracy_reward(const ParsedCompletion& completion, int reference_label) {
  if (reference_label != 0 && reference_label != 1) {
    throw std::invalid_argument("accuracy_reward: reference label must be 0 or 1");
  }
  const BinarizedAnswer bin = binarize(completion.answer_text);
  return (bin.value && *bin.value == reference_label) ? 1.0 : 0.0;
}

double format_reward(std::string_view raw) {
  return parse_completion(raw).well_formed ? 1.0 : 0.0;
}

double fact_reward(std::string_view raw, const std::vector<ConceptEntry>& concepts) {
  if (concepts.empty()) {
    throw std::invalid_argument("fact_reward: record has no concepts");
  }
  const ParsedCompletion parsed = parse_completion(raw);
  std::string space;
  if (parsed.well_formed) {
    space.reserve(parsed.think_text.size() + parsed.answer_text.size() + 1);
    space += parsed.think_text;
    space += '\n';
    space += parsed.answer_text;
  } else {
    space.assign(raw);
  }

  int present = 0;
  for (const auto& entry : concepts) {
    bool found = text::contains_phrase(space, entry.surface);
    for (size_t i = 0; !found && i < entry.synonyms.size(); ++i) {
      found = text::contains_phrase(space, entry.synonyms[i]);
    }
    if (found) ++present;
  }
  double reward = 0.2 * static_cast<double>(present);
  if (reward > 1.0) reward = 1.0;
  return reward;
}

double consistency_reward(const ParsedCompletion& completion, const JudgeVerdict& verdict) {
  (void)completion;  // the verdict was produced for this completion upstream
  return verdict.consistent ? 1.0 : -0.5;
}

RewardVector total_reward(std::string_view raw, const QARecord& record,
                          const RewardMask& mask, const JudgeVerdict* verdict) {
  if (mask.enabled_count() == 0) {
    throw std::invalid_argument("total_reward: no reward components enabled");
  }
  if (mask.cons_on && verdict == nullptr) {
    throw std::invalid_argument("total_reward: consistency enabled without a verdict");
  }

  RewardVector rv;
  rv.mask = mask;
  const ParsedCompletion parsed = parse_completion(raw);
  double sum = 0.0;
  int enabled = 0;
  if (mask.acc_on) {
    rv.acc = accuracy_reward(parsed, record.pseudo_label);
    sum += rv.acc;
    ++enabled;
  }
  if (mask.format_on) {
    rv.format = parsed.well_formed ? 1.0 : 0.0;
    sum += rv.format;
    ++enabled;
  }
  if (mask.fact_on) {
    rv.fact = fact_reward(raw, record.concepts);
    sum += rv.fact;
    ++enabled;
  }
  if (mask.cons_on) {
    rv.cons = consistency_reward(parsed, *verdict);
    sum += rv.cons;
    ++enabled;
  }
  rv.total = sum / static_cast<double>(enabled);
  return rv;
}

}  // namespace factrl
