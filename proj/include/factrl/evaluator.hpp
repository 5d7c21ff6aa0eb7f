#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "factrl/dataset.hpp"
#include "factrl/judge.hpp"
#include "factrl/policy.hpp"
#include "factrl/rewards.hpp"
#include "factrl/trainer.hpp"

namespace factrl {

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;
  long unparseable = 0;
  long total() const { return tp + fp + fn + tn + unparseable; }
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionCounts counts;
  std::string fingerprint;
};

enum class Reference { gold, pseudo };
const char* to_string(Reference reference);

// Confusion tally over (prediction, reference) pairs; nullopt predictions are
// misses: fn under a positive reference, otherwise the unparseable cell. The
// five cells always sum to the pair count, and precision never benefits.
ConfusionCounts tally_confusion(
    const std::vector<std::pair<std::optional<int>, int>>& pairs);

// precision = 0 when tp+fp = 0, recall = 0 when tp+fn = 0, f1 = 0 when
// precision + recall = 0.
MetricsReport metrics_from_counts(const ConfusionCounts& counts,
                                  std::string fingerprint = "");

// One greedy rollout per record, parsed and binarized. Deterministic; the
// seed parameter is accepted for interface stability and never consumed.
MetricsReport evaluate(const PolicyParams& params, const std::vector<QARecord>& records,
                       Reference reference, uint64_t seed = 0);

// Mean total reward of greedy rollouts under the given mask; used to re-score
// trained policies under the full mask regardless of their training mask.
double mean_greedy_reward(const PolicyParams& params, const std::vector<QARecord>& records,
                          const RewardMask& mask, Judge& judge);

struct AblationRowSpec {
  std::string name;
  bool use_sft = false;
  bool run_grpo = false;
  RewardMask mask;  // GRPO training mask; ignored unless run_grpo
};

// base, sft_only, grpo_scratch_all, then SFT+GRPO with growing reward sets.
std::vector<AblationRowSpec> default_ablation_grid();

struct AblationConfig {
  TrainConfig sft;   // SFT stage settings (mask ignored)
  TrainConfig grpo;  // GRPO stage settings; mask overridden per row
  double train_frac = 0.8;
};

// Stage settings tuned for the synthetic benchmark (n=2000, k=5, noise=0.1).
// The strong KL anchor is what keeps the consistency reward from locking
// answer and polarity into a constant-yes equilibrium before accuracy can
// separate them; see the trainer tests for the failure shape.
AblationConfig default_benchmark_config(uint64_t seed = 7);

struct AblationRowResult {
  std::string name;
  MetricsReport metrics;             // against gold labels on the eval split
  double mean_full_reward = 0.0;     // greedy full-mask reward on the eval split
  double precision_recall_gap = 0.0;
};

struct AblationResult {
  std::vector<AblationRowResult> rows;
  std::string report_markdown;
  std::string report_csv;
};

// Runs every grid row on one shared split with one shared seed; the SFT stage
// is trained once and reused by every row that starts from it. When out_dir
// is set, writes per-row checkpoints/run logs plus report.md and report.csv.
AblationResult run_ablation(const Dataset& data, const AblationConfig& cfg, Judge& judge,
                            const std::vector<AblationRowSpec>& grid,
                            const std::string& out_dir = "");

struct PseudoStudyResult {
  MetricsReport pseudo_run;        // supervised by pseudo labels as ingested
  MetricsReport gold_run;          // supervised by gold labels substituted in
  double f1_gap = 0.0;             // gold F1 - pseudo F1
  bool identical_checkpoints = false;
  std::string pseudo_checkpoint;   // canonical checkpoint JSON
  std::string gold_checkpoint;
  std::string report_markdown;
};

// Trains SFT + GRPO(all rewards) twice, once per supervision source, and
// evaluates both against gold labels.
PseudoStudyResult pseudo_label_study(const Dataset& data, const AblationConfig& cfg,
                                     Judge& judge, const std::string& out_dir = "");

std::string metrics_to_json(const MetricsReport& m);

}  // namespace factrl
