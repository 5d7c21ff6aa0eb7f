#include "factrl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "factrl/completion.hpp"
#include "factrl/jsonfmt.hpp"

namespace factrl {

namespace {

double pop_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) {
    const double d = x - mean;
    var += d * d;
  }
  return std::sqrt(var / static_cast<double>(v.size()));
}

void check_group_invariants(const std::vector<double>& advantages,
                            const std::vector<double>& totals, double adv_epsilon) {
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(advantages.size());
  if (std::abs(mean) >= 1e-9) {
    throw std::logic_error("group invariant violated: advantage mean " + fmt_double(mean));
  }
  bool all_zero = true;
  for (double a : advantages) {
    if (a != 0.0) {
      all_zero = false;
      break;
    }
  }
  if (all_zero) return;
  // The normalization divides by (s + eps), so the achievable std is exactly
  // s / (s + eps); allow that much slack plus rounding.
  const double s = pop_std(totals);
  const double bound = adv_epsilon / (s + adv_epsilon) + 1e-9;
  const double dev = std::abs(pop_std(advantages) - 1.0);
  if (dev > bound) {
    throw std::logic_error("group invariant violated: advantage std off by " + fmt_double(dev));
  }
}

JudgeVerdict verdict_for(Judge& judge, const QARecord& record, const std::string& raw) {
  const ParsedCompletion parsed = parse_completion(raw);
  JudgeRequest req;
  req.id = record.id;
  req.question = record.question;
  req.reasoning = parsed.think_text;
  req.answer = parsed.answer_text;
  return judge.judge(req);
}

}  // namespace

const char* to_string(JudgeMode mode) {
  switch (mode) {
    case JudgeMode::local_rule: return "local_rule";
    case JudgeMode::remote: return "remote";
    case JudgeMode::remote_with_fallback: return "remote_with_fallback";
  }
  return "unknown";
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (group_size < 2) throw std::invalid_argument("TrainConfig: group_size must be >= 2");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) {
    throw std::invalid_argument("TrainConfig: clip_eps must lie in (0,1)");
  }
  if (kl_beta < 0.0) throw std::invalid_argument("TrainConfig: kl_beta must be >= 0");
  if (inner_iters < 1) throw std::invalid_argument("TrainConfig: inner_iters must be >= 1");
  if (!(adv_epsilon > 0.0)) throw std::invalid_argument("TrainConfig: adv_epsilon must be > 0");
  if (!(sft_lr_scale > 0.0)) throw std::invalid_argument("TrainConfig: sft_lr_scale must be > 0");
  if (batch_size < 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 0");
  if (mask.enabled_count() == 0) {
    throw std::invalid_argument("TrainConfig: at least one reward component must be enabled");
  }
}

std::string TrainConfig::to_json() const {
  std::string out = "{\"lr\":";
  out += fmt_double(lr);
  out += ",\"epochs\":";
  out += std::to_string(epochs);
  out += ",\"group_size\":";
  out += std::to_string(group_size);
  out += ",\"clip_eps\":";
  out += fmt_double(clip_eps);
  out += ",\"kl_beta\":";
  out += fmt_double(kl_beta);
  out += ",\"inner_iters\":";
  out += std::to_string(inner_iters);
  out += ",\"adv_epsilon\":";
  out += fmt_double(adv_epsilon);
  out += ",\"seed\":";
  out += std::to_string(seed);
  out += ",\"rewards\":\"";
  out += mask.describe();
  out += "\",\"judge\":\"";
  out += to_string(judge_mode);
  out += "\",\"sft_lr_scale\":";
  out += fmt_double(sft_lr_scale);
  out += ",\"batch_size\":";
  out += std::to_string(batch_size);
  out += "}";
  return out;
}

std::string TrainConfig::config_hash() const { return rng::hex64(rng::fnv1a(to_json())); }

std::string StepLog::to_json() const {
  std::string out = "{\"step\":";
  out += std::to_string(step);
  out += ",\"mean_total_reward\":";
  out += fmt_double(mean_total_reward);
  out += ",\"mean_components\":{\"acc\":";
  out += fmt_double(mean_acc);
  out += ",\"format\":";
  out += fmt_double(mean_format);
  out += ",\"fact\":";
  out += fmt_double(mean_fact);
  out += ",\"cons\":";
  out += fmt_double(mean_cons);
  out += "},\"mean_kl\":";
  out += fmt_double(mean_kl);
  out += ",\"clip_fraction\":";
  out += fmt_double(clip_fraction);
  out += ",\"wallclock_ms\":";
  out += std::to_string(wallclock_ms);
  out += "}";
  return out;
}

std::vector<double> compute_advantages(const std::vector<double>& totals,
                                       double adv_epsilon) {
  const size_t g = totals.size();
  if (g < 2) throw std::invalid_argument("compute_advantages: need at least 2 rollouts");

  std::vector<double> adv(g, 0.0);
  bool all_equal = true;
  for (size_t i = 1; i < g; ++i) {
    if (totals[i] != totals[0]) {
      all_equal = false;
      break;
    }
  }
  if (all_equal) return adv;  // zero variance, no preference signal

  double mean = 0.0;
  for (double r : totals) mean += r;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (double r : totals) {
    const double d = r - mean;
    var += d * d;
  }
  const double s = std::sqrt(var / static_cast<double>(g));
  if (s == 0.0) return adv;
  for (size_t i = 0; i < g; ++i) adv[i] = (totals[i] - mean) / (s + adv_epsilon);
  return adv;
}

Choices sft_target(const QARecord& record, int k) {
  Choices c;
  c.fmt_ok = 1;
  c.answer = record.pseudo_label;
  c.polarity = record.pseudo_label;
  c.mentions.assign(k, 0);
  const size_t m = std::min(record.concepts.size(), static_cast<size_t>(k));
  for (size_t i = 0; i < m; ++i) c.mentions[i] = 1;
  return c;
}

PolicyParams sft_fit(const std::vector<QARecord>& records, PolicyParams init,
                     const TrainConfig& cfg, std::vector<SftEpochLog>* log) {
  cfg.validate();
  if (records.empty()) throw std::invalid_argument("sft_fit: empty training set");
  for (const auto& r : records) {
    if (r.pseudo_label != 0 && r.pseudo_label != 1) {
      throw std::invalid_argument("sft_fit: record " + r.id + " lacks a binary pseudo_label");
    }
  }

  const double n = static_cast<double>(records.size());
  const double step = cfg.lr * cfg.sft_lr_scale;
  std::vector<Choices> targets;
  targets.reserve(records.size());
  for (const auto& r : records) targets.push_back(sft_target(r, init.k));

  PolicyParams params = std::move(init);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    PolicyParams grad = PolicyParams::zeros(params.k);
    double nll = 0.0;
    for (size_t i = 0; i < records.size(); ++i) {
      nll -= logprob(params, records[i], targets[i]);
      grad.axpy(1.0 / n, grad_logprob(params, records[i], targets[i]));
    }
    if (log) log->push_back(SftEpochLog{epoch, nll / n});
    params.axpy(step, grad);
    if (!params.all_finite()) {
      throw std::runtime_error("sft_fit: parameters diverged at epoch " + std::to_string(epoch));
    }
  }
  return params;
}

double grpo_objective(const PolicyParams& params, const std::vector<RolloutEval>& rollouts,
                      double clip_eps, double kl_beta, GrpoStats* stats) {
  if (rollouts.empty()) throw std::invalid_argument("grpo_objective: no rollouts");
  double J = 0.0;
  double kl = 0.0;
  int clipped = 0;
  for (const auto& re : rollouts) {
    const double lp_new = logprob(params, *re.record, re.choices);
    const double rho = std::exp(lp_new - re.logprob_old);
    const double A = re.advantage;
    const double rho_clipped = std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps);
    const double surrogate = std::min(rho * A, rho_clipped * A);
    const double delta = re.logprob_ref - lp_new;
    const double k3 = std::exp(delta) - delta - 1.0;
    J += surrogate - kl_beta * k3;
    kl += k3;
    if ((A > 0.0 && rho > 1.0 + clip_eps) || (A < 0.0 && rho < 1.0 - clip_eps)) ++clipped;
  }
  const double n = static_cast<double>(rollouts.size());
  if (stats) {
    stats->mean_kl = kl / n;
    stats->clip_fraction = static_cast<double>(clipped) / n;
  }
  return J / n;
}

PolicyParams grpo_gradient(const PolicyParams& params, const std::vector<RolloutEval>& rollouts,
                           double clip_eps, double kl_beta, GrpoStats* stats) {
  if (rollouts.empty()) throw std::invalid_argument("grpo_gradient: no rollouts");
  PolicyParams acc = PolicyParams::zeros(params.k);
  double kl = 0.0;
  int clipped = 0;
  for (const auto& re : rollouts) {
    const double lp_new = logprob(params, *re.record, re.choices);
    const double rho = std::exp(lp_new - re.logprob_old);
    const double A = re.advantage;
    const bool gate_off =
        (A > 0.0 && rho > 1.0 + clip_eps) || (A < 0.0 && rho < 1.0 - clip_eps);
    if (gate_off) ++clipped;
    const double delta = re.logprob_ref - lp_new;
    kl += std::exp(delta) - delta - 1.0;
    const double coef = (gate_off ? 0.0 : A * rho) + kl_beta * (std::exp(delta) - 1.0);
    if (coef != 0.0) acc.axpy(coef, grad_logprob(params, *re.record, re.choices));
  }
  const double n = static_cast<double>(rollouts.size());
  if (stats) {
    stats->mean_kl = kl / n;
    stats->clip_fraction = static_cast<double>(clipped) / n;
  }
  PolicyParams grad = PolicyParams::zeros(params.k);
  grad.axpy(1.0 / n, acc);
  return grad;
}

PolicyParams grpo_step(const std::vector<QARecord>& batch, const PolicyParams& params,
                       const PolicyParams& ref_params, const TrainConfig& cfg, Judge& judge,
                       int step_index, StepLog* log_out, std::vector<Group>* groups_out) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("grpo_step: empty batch");
  const auto t0 = std::chrono::steady_clock::now();

  const int G = cfg.group_size;
  std::vector<Group> groups;
  groups.reserve(batch.size());
  std::vector<RolloutEval> evals;
  evals.reserve(batch.size() * static_cast<size_t>(G));
  double sum_total = 0.0, sum_acc = 0.0, sum_format = 0.0, sum_fact = 0.0, sum_cons = 0.0;

  for (const auto& record : batch) {
    Group grp;
    grp.record_id = record.id;
    std::vector<double> totals(static_cast<size_t>(G));
    for (int g = 0; g < G; ++g) {
      auto stream = rng::derive(cfg.seed, record.id, static_cast<uint64_t>(step_index),
                                static_cast<uint64_t>(g));
      Rollout rollout = sample(params, record, stream);

      JudgeVerdict verdict;
      const JudgeVerdict* vptr = nullptr;
      if (cfg.mask.cons_on) {
        verdict = verdict_for(judge, record, rollout.raw_text);
        vptr = &verdict;
      }
      const RewardVector rv = total_reward(rollout.raw_text, record, cfg.mask, vptr);
      totals[static_cast<size_t>(g)] = rv.total;
      sum_total += rv.total;
      sum_acc += rv.acc;
      sum_format += rv.format;
      sum_fact += rv.fact;
      sum_cons += rv.cons;
      grp.rollouts.push_back(std::move(rollout));
      grp.rewards.push_back(rv);
    }
    grp.advantages = compute_advantages(totals, cfg.adv_epsilon);
    if (cfg.debug_asserts) check_group_invariants(grp.advantages, totals, cfg.adv_epsilon);

    for (int g = 0; g < G; ++g) {
      RolloutEval re;
      re.record = &record;
      re.choices = grp.rollouts[static_cast<size_t>(g)].choices;
      re.logprob_old = grp.rollouts[static_cast<size_t>(g)].logprob;
      re.logprob_ref = logprob(ref_params, record, re.choices);
      re.advantage = grp.advantages[static_cast<size_t>(g)];
      evals.push_back(std::move(re));
    }
    groups.push_back(std::move(grp));
  }

  PolicyParams cur = params;
  GrpoStats stats;
  for (int it = 0; it < cfg.inner_iters; ++it) {
    PolicyParams grad = grpo_gradient(cur, evals, cfg.clip_eps, cfg.kl_beta, &stats);
    if (!grad.all_finite()) {
      throw std::runtime_error("grpo_step: non-finite gradient at step " +
                               std::to_string(step_index) + ", inner iteration " +
                               std::to_string(it) + "; config " + cfg.to_json());
    }
    cur.axpy(cfg.lr, grad);
    if (!cur.all_finite()) {
      throw std::runtime_error("grpo_step: parameters diverged at step " +
                               std::to_string(step_index) + "; config " + cfg.to_json());
    }
  }

  if (log_out) {
    const double n = static_cast<double>(evals.size());
    log_out->step = step_index;
    log_out->mean_total_reward = sum_total / n;
    log_out->mean_acc = sum_acc / n;
    log_out->mean_format = sum_format / n;
    log_out->mean_fact = sum_fact / n;
    log_out->mean_cons = sum_cons / n;
    log_out->mean_kl = stats.mean_kl;
    log_out->clip_fraction = stats.clip_fraction;
    log_out->wallclock_ms =
        cfg.timing ? std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count()
                   : 0;
  }
  if (groups_out) *groups_out = std::move(groups);
  return cur;
}

TrainResult train_grpo(const std::vector<QARecord>& records, const PolicyParams& init,
                       const TrainConfig& cfg, Judge& judge, const std::string& run_dir) {
  cfg.validate();
  if (records.empty()) throw std::invalid_argument("train_grpo: empty training set");

  std::ofstream log_stream;
  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    log_stream.open(run_dir + "/run_log.jsonl", std::ios::binary | std::ios::trunc);
    if (!log_stream) throw std::runtime_error("cannot write run log in " + run_dir);
  }

  TrainResult res;
  res.params = init;
  const PolicyParams ref = init;  // frozen reference for the whole run
  const size_t n = records.size();
  const size_t bs = cfg.batch_size == 0 ? n : static_cast<size_t>(cfg.batch_size);

  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    auto stream = rng::derive(cfg.seed, "grpo_shuffle", static_cast<uint64_t>(epoch));
    for (size_t i = n - 1; i > 0; --i) {
      const size_t j = stream.below(i + 1);
      std::swap(order[i], order[j]);
    }

    for (size_t start = 0; start < n; start += bs) {
      const size_t stop = std::min(n, start + bs);
      std::vector<QARecord> batch;
      batch.reserve(stop - start);
      for (size_t i = start; i < stop; ++i) batch.push_back(records[order[i]]);

      StepLog sl;
      res.params = grpo_step(batch, res.params, ref, cfg, judge, step, &sl);
      if (log_stream) log_stream << sl.to_json() << '\n';
      res.steps.push_back(sl);
      ++step;
    }

    if (!run_dir.empty()) {
      CheckpointMeta meta{"grpo", epoch + 1, cfg.config_hash()};
      save_checkpoint(res.params, meta,
                      run_dir + "/checkpoint_epoch_" + std::to_string(epoch + 1) + ".json");
    }
  }
  return res;
}

std::string step_logs_to_jsonl(const std::vector<StepLog>& steps) {
  std::string out;
  for (const auto& s : steps) {
    out += s.to_json();
    out += '\n';
  }
  return out;
}

}  // namespace factrl
