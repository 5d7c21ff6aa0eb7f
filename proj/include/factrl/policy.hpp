#pragma once

#include <string>
#include <vector>

#include "factrl/dataset.hpp"
#include "factrl/rng.hpp"

namespace factrl {

// Logistic weights for every decision head: format, answer, polarity and one
// mention head per concept slot. Feature dim d = k + 1 (evidence plus bias).
// The same shape doubles as a gradient container.
struct PolicyParams {
  int version = 1;
  int k = 0;
  std::vector<double> w_fmt;
  std::vector<double> w_ans;
  std::vector<double> w_pol;
  std::vector<std::vector<double>> W_concept;  // k rows of length d

  int d() const { return k + 1; }
  static PolicyParams zeros(int k);
  bool same_shape(const PolicyParams& other) const;
  bool all_finite() const;

  // this += a * g, shapes must match.
  void axpy(double a, const PolicyParams& g);
};

struct Choices {
  int fmt_ok = 0;
  int answer = 0;
  int polarity = 0;
  std::vector<int> mentions;  // length k
};

struct Rollout {
  Choices choices;
  std::string raw_text;
  double logprob = 0.0;
  std::vector<double> head_logprobs;  // fmt, answer, polarity, mentions...
};

double sigmoid(double z);
// log(sigmoid(z)), stable for large |z|.
double log_sigmoid(double z);

// [evidence..., 1.0]; throws if evidence is missing or not length k.
std::vector<double> features(const QARecord& record, int k);

// Deterministic text for a choice assignment. Mention head i names
// record.concepts[i]; heads beyond the concept list render nothing.
// fmt_ok=0 drops the closing think tag, which the grammar always rejects.
std::string render_completion(const Choices& choices, const QARecord& record);

Rollout sample(const PolicyParams& params, const QARecord& record, rng::Stream& stream);

// Argmax at every head: choice 1 iff w.x > 0.
Choices greedy_choices(const PolicyParams& params, const QARecord& record);
Rollout greedy_rollout(const PolicyParams& params, const QARecord& record);

double logprob(const PolicyParams& params, const QARecord& record, const Choices& choices);

// d(logprob)/d(params): per head (y - sigmoid(w.x)) * x.
PolicyParams grad_logprob(const PolicyParams& params, const QARecord& record,
                          const Choices& choices);

struct CheckpointMeta {
  std::string stage = "init";  // init | sft | grpo
  int epoch = 0;
  std::string config_hash;     // 16 hex chars
};

std::string checkpoint_to_json(const PolicyParams& params, const CheckpointMeta& meta);
void save_checkpoint(const PolicyParams& params, const CheckpointMeta& meta,
                     const std::string& path);
PolicyParams load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace factrl
