#include "factrl/evaluator.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "factrl/completion.hpp"
#include "factrl/jsonfmt.hpp"
#include "factrl/rng.hpp"

namespace factrl {

namespace {

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return std::string(buf);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

int reference_label(const QARecord& record, Reference reference) {
  if (reference == Reference::pseudo) return record.pseudo_label;
  if (!record.gold_label) {
    throw std::invalid_argument("evaluate: record " + record.id + " has no gold label");
  }
  return *record.gold_label;
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

std::string params_fingerprint(const PolicyParams& params, Reference reference, size_t n) {
  const std::string canon = checkpoint_to_json(params, CheckpointMeta{"eval", 0, ""});
  return rng::hex64(rng::fnv1a(canon)) + ":" + to_string(reference) + ":" + std::to_string(n);
}

int infer_k(const Dataset& data) {
  if (data.manifest.concept_slots > 0) return data.manifest.concept_slots;
  for (const auto& r : data.records) {
    if (r.evidence) return static_cast<int>(r.evidence->size());
  }
  throw std::invalid_argument("dataset carries no evidence vectors; cannot size the policy");
}

}  // namespace

const char* to_string(Reference reference) {
  return reference == Reference::gold ? "gold" : "pseudo";
}

ConfusionCounts tally_confusion(
    const std::vector<std::pair<std::optional<int>, int>>& pairs) {
  ConfusionCounts c;
  for (const auto& [pred, ref] : pairs) {
    if (ref != 0 && ref != 1) {
      throw std::invalid_argument("tally_confusion: reference label must be 0 or 1");
    }
    if (!pred) {
      if (ref == 1) {
        ++c.fn;  // a positive we failed to call
      } else {
        ++c.unparseable;  // a negative miss; tn would reward the failure
      }
      continue;
    }
    if (*pred != 0 && *pred != 1) {
      throw std::invalid_argument("tally_confusion: prediction must be 0, 1 or absent");
    }
    if (*pred == 1 && ref == 1) {
      ++c.tp;
    } else if (*pred == 1 && ref == 0) {
      ++c.fp;
    } else if (*pred == 0 && ref == 1) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

MetricsReport metrics_from_counts(const ConfusionCounts& counts, std::string fingerprint) {
  const long total = counts.total();
  if (total <= 0) throw std::invalid_argument("metrics_from_counts: empty tally");
  if (counts.tp < 0 || counts.fp < 0 || counts.fn < 0 || counts.tn < 0 ||
      counts.unparseable < 0) {
    throw std::invalid_argument("metrics_from_counts: negative count");
  }

  MetricsReport m;
  m.counts = counts;
  m.fingerprint = std::move(fingerprint);
  m.accuracy = static_cast<double>(counts.tp + counts.tn) / static_cast<double>(total);
  m.precision = (counts.tp + counts.fp) == 0
                    ? 0.0
                    : static_cast<double>(counts.tp) /
                          static_cast<double>(counts.tp + counts.fp);
  m.recall = (counts.tp + counts.fn) == 0
                 ? 0.0
                 : static_cast<double>(counts.tp) /
                       static_cast<double>(counts.tp + counts.fn);
  m.f1 = (m.precision + m.recall) == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

MetricsReport evaluate(const PolicyParams& params, const std::vector<QARecord>& records,
                       Reference reference, uint64_t seed) {
  (void)seed;  // greedy decoding consumes no randomness
  if (records.empty()) throw std::invalid_argument("evaluate: no records");

  std::vector<std::pair<std::optional<int>, int>> pairs;
  pairs.reserve(records.size());
  for (const auto& record : records) {
    const int ref = reference_label(record, reference);
    const Rollout ro = greedy_rollout(params, record);
    const ParsedCompletion parsed = parse_completion(ro.raw_text);
    const BinarizedAnswer bin = binarize(parsed.answer_text);
    pairs.emplace_back(bin.value, ref);
  }
  return metrics_from_counts(tally_confusion(pairs),
                             params_fingerprint(params, reference, records.size()));
}

double mean_greedy_reward(const PolicyParams& params, const std::vector<QARecord>& records,
                          const RewardMask& mask, Judge& judge) {
  if (records.empty()) throw std::invalid_argument("mean_greedy_reward: no records");
  double sum = 0.0;
  for (const auto& record : records) {
    const Rollout ro = greedy_rollout(params, record);
    JudgeVerdict verdict;
    const JudgeVerdict* vptr = nullptr;
    if (mask.cons_on) {
      verdict = verdict_for(judge, record, ro.raw_text);
      vptr = &verdict;
    }
    sum += total_reward(ro.raw_text, record, mask, vptr).total;
  }
  return sum / static_cast<double>(records.size());
}

std::vector<AblationRowSpec> default_ablation_grid() {
  return {
      {"base", false, false, RewardMask::all()},
      {"sft_only", true, false, RewardMask::all()},
      {"grpo_scratch_all", false, true, RewardMask::all()},
      {"sft_grpo_acc_format", true, true, RewardMask::acc_format()},
      {"sft_grpo_acc_format_fact", true, true, RewardMask::acc_format_fact()},
      {"sft_grpo_all", true, true, RewardMask::all()},
  };
}

AblationConfig default_benchmark_config(uint64_t seed) {
  AblationConfig cfg;
  cfg.train_frac = 0.8;
  cfg.sft.lr = 1e-3;
  cfg.sft.epochs = 200;
  cfg.sft.seed = seed;
  cfg.grpo.lr = 0.15;
  cfg.grpo.epochs = 90;
  cfg.grpo.group_size = 12;
  cfg.grpo.kl_beta = 0.8;
  cfg.grpo.batch_size = 32;
  cfg.grpo.seed = seed;
  return cfg;
}

AblationResult run_ablation(const Dataset& data, const AblationConfig& cfg, Judge& judge,
                            const std::vector<AblationRowSpec>& grid,
                            const std::string& out_dir) {
  if (grid.empty()) throw std::invalid_argument("run_ablation: empty grid");
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  const int k = infer_k(data);
  const auto [train, eval] = split(data.records, cfg.train_frac, cfg.grpo.seed);
  const PolicyParams base = PolicyParams::zeros(k);

  bool need_sft = false;
  for (const auto& row : grid) need_sft = need_sft || row.use_sft;
  PolicyParams sft_params = base;
  if (need_sft) {
    sft_params = sft_fit(train, base, cfg.sft);
    if (!out_dir.empty()) {
      CheckpointMeta meta{"sft", cfg.sft.epochs, cfg.sft.config_hash()};
      save_checkpoint(sft_params, meta, out_dir + "/sft_checkpoint.json");
    }
  }

  AblationResult result;
  for (const auto& row : grid) {
    PolicyParams params = row.use_sft ? sft_params : base;
    std::string stage = row.use_sft ? "sft" : "init";
    int epoch = row.use_sft ? cfg.sft.epochs : 0;
    TrainConfig rcfg = cfg.grpo;
    if (row.run_grpo) {
      rcfg.mask = row.mask;
      const std::string row_dir = out_dir.empty() ? "" : out_dir + "/" + row.name;
      params = train_grpo(train, params, rcfg, judge, row_dir).params;
      stage = "grpo";
      epoch = rcfg.epochs;
    }

    AblationRowResult rr;
    rr.name = row.name;
    rr.metrics = evaluate(params, eval, Reference::gold);
    rr.mean_full_reward = mean_greedy_reward(params, eval, RewardMask::all(), judge);
    rr.precision_recall_gap = std::abs(rr.metrics.precision - rr.metrics.recall);
    result.rows.push_back(std::move(rr));

    if (!out_dir.empty()) {
      CheckpointMeta meta{stage, epoch, row.run_grpo ? rcfg.config_hash() : cfg.sft.config_hash()};
      std::filesystem::create_directories(out_dir + "/" + row.name);
      save_checkpoint(params, meta, out_dir + "/" + row.name + "/checkpoint_final.json");
    }
  }

  std::string md = "| run | Acc. | Pre. | Rec. | F1 |\n|---|---|---|---|---|\n";
  for (const auto& r : result.rows) {
    md += "| " + r.name + " | " + fmt4(r.metrics.accuracy) + " | " + fmt4(r.metrics.precision) +
          " | " + fmt4(r.metrics.recall) + " | " + fmt4(r.metrics.f1) + " |\n";
  }
  md += "\n| run | mean reward, all components |\n|---|---|\n";
  for (const auto& r : result.rows) {
    md += "| " + r.name + " | " + fmt4(r.mean_full_reward) + " |\n";
  }
  result.report_markdown = md;

  std::string csv =
      "run,accuracy,precision,recall,f1,tp,fp,fn,tn,unparseable,mean_full_reward\n";
  for (const auto& r : result.rows) {
    csv += r.name + ',' + fmt_double(r.metrics.accuracy) + ',' +
           fmt_double(r.metrics.precision) + ',' + fmt_double(r.metrics.recall) + ',' +
           fmt_double(r.metrics.f1) + ',' + std::to_string(r.metrics.counts.tp) + ',' +
           std::to_string(r.metrics.counts.fp) + ',' + std::to_string(r.metrics.counts.fn) +
           ',' + std::to_string(r.metrics.counts.tn) + ',' +
           std::to_string(r.metrics.counts.unparseable) + ',' +
           fmt_double(r.mean_full_reward) + '\n';
  }
  result.report_csv = csv;

  if (!out_dir.empty()) {
    write_text_file(out_dir + "/report.md", result.report_markdown);
    write_text_file(out_dir + "/report.csv", result.report_csv);
  }
  return result;
}

PseudoStudyResult pseudo_label_study(const Dataset& data, const AblationConfig& cfg,
                                     Judge& judge, const std::string& out_dir) {
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  const int k = infer_k(data);

  auto run_pipeline = [&](const std::vector<QARecord>& records, const std::string& tag)
      -> std::pair<MetricsReport, std::string> {
    const auto [train, eval] = split(records, cfg.train_frac, cfg.grpo.seed);
    PolicyParams params = sft_fit(train, PolicyParams::zeros(k), cfg.sft);
    TrainConfig rcfg = cfg.grpo;
    rcfg.mask = RewardMask::all();
    const std::string row_dir = out_dir.empty() ? "" : out_dir + "/" + tag;
    params = train_grpo(train, params, rcfg, judge, row_dir).params;
    const std::string canon =
        checkpoint_to_json(params, CheckpointMeta{"grpo", rcfg.epochs, rcfg.config_hash()});
    if (!row_dir.empty()) {
      std::filesystem::create_directories(row_dir);
      write_text_file(row_dir + "/checkpoint_final.json", canon + "\n");
    }
    return {evaluate(params, eval, Reference::gold), canon};
  };

  std::vector<QARecord> gold_supervised = data.records;
  for (auto& r : gold_supervised) {
    if (!r.gold_label) {
      throw std::invalid_argument("pseudo_label_study: record " + r.id + " has no gold label");
    }
    r.pseudo_label = *r.gold_label;
  }

  PseudoStudyResult res;
  auto [pm, pc] = run_pipeline(data.records, "pseudo_supervised");
  auto [gm, gc] = run_pipeline(gold_supervised, "gold_supervised");
  res.pseudo_run = std::move(pm);
  res.gold_run = std::move(gm);
  res.pseudo_checkpoint = std::move(pc);
  res.gold_checkpoint = std::move(gc);
  res.f1_gap = res.gold_run.f1 - res.pseudo_run.f1;
  res.identical_checkpoints = res.pseudo_checkpoint == res.gold_checkpoint;

  std::string md = "| supervision | Acc. | Pre. | Rec. | F1 |\n|---|---|---|---|---|\n";
  md += "| pseudo | " + fmt4(res.pseudo_run.accuracy) + " | " + fmt4(res.pseudo_run.precision) +
        " | " + fmt4(res.pseudo_run.recall) + " | " + fmt4(res.pseudo_run.f1) + " |\n";
  md += "| gold | " + fmt4(res.gold_run.accuracy) + " | " + fmt4(res.gold_run.precision) +
        " | " + fmt4(res.gold_run.recall) + " | " + fmt4(res.gold_run.f1) + " |\n";
  md += "\nF1 gap (gold - pseudo): " + fmt4(res.f1_gap) + "\n";
  md += "identical checkpoints: " + std::string(res.identical_checkpoints ? "yes" : "no") + "\n";
  res.report_markdown = md;

  if (!out_dir.empty()) write_text_file(out_dir + "/report.md", res.report_markdown);
  return res;
}

std::string metrics_to_json(const MetricsReport& m) {
  std::string out = "{\"accuracy\":";
  out += fmt_double(m.accuracy);
  out += ",\"precision\":";
  out += fmt_double(m.precision);
  out += ",\"recall\":";
  out += fmt_double(m.recall);
  out += ",\"f1\":";
  out += fmt_double(m.f1);
  out += ",\"counts\":{\"tp\":";
  out += std::to_string(m.counts.tp);
  out += ",\"fp\":";
  out += std::to_string(m.counts.fp);
  out += ",\"fn\":";
  out += std::to_string(m.counts.fn);
  out += ",\"tn\":";
  out += std::to_string(m.counts.tn);
  out += ",\"unparseable\":";
  out += std::to_string(m.counts.unparseable);
  out += "},\"fingerprint\":\"";
  out += m.fingerprint;
  out += "\"}";
  return out;
}

}  // namespace factrl
