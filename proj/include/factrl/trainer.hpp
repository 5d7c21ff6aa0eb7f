#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "factrl/dataset.hpp"
#include "factrl/judge.hpp"
#include "factrl/policy.hpp"
#include "factrl/rewards.hpp"

namespace factrl {

enum class JudgeMode { local_rule, remote, remote_with_fallback };

const char* to_string(JudgeMode mode);

struct TrainConfig {
  double lr = 5e-5;
  int epochs = 2;
  int group_size = 6;
  double clip_eps = 0.2;
  double kl_beta = 0.04;
  int inner_iters = 1;  // mu
  double adv_epsilon = 1e-8;
  uint64_t seed = 0;
  RewardMask mask;
  JudgeMode judge_mode = JudgeMode::local_rule;

  double sft_lr_scale = 20.0;  // SFT steps at lr * scale; GRPO uses lr as-is
  int batch_size = 32;         // records per GRPO step, 0 = whole epoch
  bool debug_asserts = true;   // per-group advantage invariant checks
  bool timing = false;         // real wallclock_ms in step logs (else 0)

  void validate() const;
  // Canonical snapshot; excludes paths so hashes are location-independent.
  std::string to_json() const;
  std::string config_hash() const;  // 16 hex chars over to_json()
};

struct Group {
  std::string record_id;
  std::vector<Rollout> rollouts;
  std::vector<RewardVector> rewards;
  std::vector<double> advantages;
};

struct StepLog {
  int step = 0;
  double mean_total_reward = 0.0;
  double mean_acc = 0.0;
  double mean_format = 0.0;
  double mean_fact = 0.0;
  double mean_cons = 0.0;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
  int64_t wallclock_ms = 0;

  std::string to_json() const;
};

struct SftEpochLog {
  int epoch = 0;
  double mean_nll = 0.0;  // at the start of the epoch, before its update
};

// a_i = (r_i - mean) / (popstd + adv_epsilon); all-equal groups map to all
// zeros exactly.
std::vector<double> compute_advantages(const std::vector<double>& totals,
                                       double adv_epsilon);

// SFT targets for a record: well-formed, answer = polarity = pseudo_label,
// mention the record's concepts.
Choices sft_target(const QARecord& record, int k);

// Full-batch gradient ascent on mean logprob of the SFT targets for
// cfg.epochs passes at cfg.lr * cfg.sft_lr_scale.
PolicyParams sft_fit(const std::vector<QARecord>& records, PolicyParams init,
                     const TrainConfig& cfg, std::vector<SftEpochLog>* log = nullptr);

// One rollout's frozen context for the surrogate objective: logprobs under
// the sampling policy and the reference policy never change across inner
// iterations.
struct RolloutEval {
  const QARecord* record = nullptr;
  Choices choices;
  double logprob_old = 0.0;
  double logprob_ref = 0.0;
  double advantage = 0.0;
};

struct GrpoStats {
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
};

// J = mean_i [ min(rho_i A_i, clip(rho_i) A_i) - kl_beta * k3_i ] with
// rho = exp(lp_new - lp_old) and k3 = exp(lp_ref - lp_new) - (lp_ref - lp_new) - 1.
double grpo_objective(const PolicyParams& params, const std::vector<RolloutEval>& rollouts,
                      double clip_eps, double kl_beta, GrpoStats* stats = nullptr);

// Analytic d(J)/d(params). The surrogate term drops out of any rollout whose
// ratio sits in the clipped regime.
PolicyParams grpo_gradient(const PolicyParams& params, const std::vector<RolloutEval>& rollouts,
                           double clip_eps, double kl_beta, GrpoStats* stats = nullptr);

// One GRPO update on a batch: sample G rollouts per record under params,
// score, normalize advantages per group, then cfg.inner_iters ascent steps.
// step_index seeds the per-rollout streams. groups_out, when set, receives
// the sampled groups for inspection.
PolicyParams grpo_step(const std::vector<QARecord>& batch, const PolicyParams& params,
                       const PolicyParams& ref_params, const TrainConfig& cfg, Judge& judge,
                       int step_index, StepLog* log_out, std::vector<Group>* groups_out = nullptr);

struct TrainResult {
  PolicyParams params;
  std::vector<StepLog> steps;
};

// cfg.epochs passes of grpo_step over seeded-shuffled batches. The reference
// policy is frozen at init for the whole run. When run_dir is non-empty,
// writes run_log.jsonl and checkpoint_epoch_<e>.json there.
TrainResult train_grpo(const std::vector<QARecord>& records, const PolicyParams& init,
                       const TrainConfig& cfg, Judge& judge, const std::string& run_dir = "");

std::string step_logs_to_jsonl(const std::vector<StepLog>& steps);

}  // namespace factrl
