#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "factrl/dataset.hpp"
#include "factrl/evaluator.hpp"
#include "factrl/jsonfmt.hpp"
#include "factrl/judge.hpp"
#include "factrl/manifest.hpp"
#include "factrl/mock_judge.hpp"
#include "factrl/policy.hpp"
#include "factrl/rewards.hpp"
#include "factrl/rng.hpp"
#include "factrl/trainer.hpp"

namespace {

using namespace factrl;

std::string join_args(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    out += argv[i];
  }
  return out;
}

std::string strip_jsonl(const std::string& path) {
  const std::string suffix = ".jsonl";
  if (path.size() > suffix.size() &&
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return path.substr(0, path.size() - suffix.size());
  }
  return path;
}

RewardMask parse_mask(const std::string& csv) {
  RewardMask m{false, false, false, false};
  size_t start = 0;
  while (start <= csv.size()) {
    size_t comma = csv.find(',', start);
    std::string name = csv.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    while (!name.empty() && name.front() == ' ') name.erase(name.begin());
    while (!name.empty() && name.back() == ' ') name.pop_back();
    if (name == "acc") {
      m.acc_on = true;
    } else if (name == "format") {
      m.format_on = true;
    } else if (name == "fact") {
      m.fact_on = true;
    } else if (name == "cons") {
      m.cons_on = true;
    } else {
      throw CLI::ValidationError(
          "--rewards", "unknown reward '" + name + "'; valid names: acc, format, fact, cons");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (m.enabled_count() == 0) {
    throw CLI::ValidationError("--rewards", "at least one reward component is required");
  }
  return m;
}

int infer_k(const Dataset& data) {
  if (data.manifest.concept_slots > 0) return data.manifest.concept_slots;
  for (const auto& r : data.records) {
    if (r.evidence) return static_cast<int>(r.evidence->size());
  }
  throw std::runtime_error("dataset carries no evidence vectors; cannot size the policy");
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return std::string(buf);
}

struct JudgeFlags {
  std::string mode = "local";
  std::string url;
  std::string api_key;
  int timeout_ms = 2000;
  int retries = 3;
  int backoff_ms = 200;
};

void add_judge_flags(CLI::App* cmd, JudgeFlags& jf) {
  cmd->add_option("--judge", jf.mode, "consistency judge: local, remote or remote-fallback")
      ->check(CLI::IsMember({"local", "remote", "remote-fallback"}))
      ->capture_default_str();
  cmd->add_option("--judge-url", jf.url, "remote judge base URL")->envname("JUDGE_URL");
  cmd->add_option("--judge-api-key", jf.api_key, "bearer token for the remote judge")
      ->envname("JUDGE_API_KEY");
  cmd->add_option("--judge-timeout-ms", jf.timeout_ms, "per-request timeout")
      ->envname("JUDGE_TIMEOUT_MS")
      ->capture_default_str();
  cmd->add_option("--judge-retries", jf.retries, "retries after the first attempt")
      ->capture_default_str();
  cmd->add_option("--judge-backoff-ms", jf.backoff_ms, "base backoff delay")
      ->capture_default_str();
}

std::unique_ptr<Judge> make_judge(const JudgeFlags& jf, JudgeMode* mode_out) {
  if (jf.mode == "local") {
    if (mode_out) *mode_out = JudgeMode::local_rule;
    return std::make_unique<LocalRuleJudge>();
  }
  RemoteJudgeConfig cfg;
  cfg.endpoint = jf.url;
  cfg.api_key = jf.api_key;
  cfg.timeout_ms = jf.timeout_ms;
  cfg.retries = jf.retries;
  cfg.backoff_base_ms = jf.backoff_ms;
  cfg.fallback_after_failure = (jf.mode == "remote-fallback");
  if (mode_out) {
    *mode_out = cfg.fallback_after_failure ? JudgeMode::remote_with_fallback : JudgeMode::remote;
  }
  return std::make_unique<JudgeClient>(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage factual-reasoning trainer: pseudo-label SFT plus "
               "group-relative policy optimization on a toy policy"};
  app.require_subcommand(1);
  const std::string command_line = join_args(argc, argv);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset with truth sidecar");
  struct {
    std::string out;
    size_t n = 2000;
    int concepts = 5;
    double noise = 0.1;
    double pos_frac = 0.5;
    uint64_t seed = 7;
  } gd;
  gen->add_option("--out", gd.out, "output JSONL path")->required();
  gen->add_option("--n", gd.n, "record count")->capture_default_str();
  gen->add_option("--concepts", gd.concepts, "evidence slots per record")->capture_default_str();
  gen->add_option("--noise", gd.noise, "label and evidence flip probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen->add_option("--pos-frac", gd.pos_frac, "positive label fraction")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen->add_option("--seed", gd.seed, "generation seed")->capture_default_str();
  gen->callback([&] {
    SynthResult synth = synth_generate(gd.n, gd.concepts, gd.noise, gd.pos_frac, gd.seed);
    save_jsonl(synth.dataset.records, gd.out);
    io::write_file(strip_jsonl(gd.out) + ".truth.jsonl", truth_to_jsonl(synth.truth));
    io::write_file(strip_jsonl(gd.out) + ".manifest.json",
                   synth.dataset.manifest.to_json() + "\n");
    std::cout << synth.dataset.manifest.to_json() << "\n";
  });

  // sft
  auto* sft = app.add_subcommand("sft", "supervised fit on pseudo labels");
  struct {
    std::string data;
    std::string out;
    std::string log;
    int epochs = 200;
    double lr = 1e-3;
    double lr_scale = 20.0;
    uint64_t seed = 7;
  } sf;
  sft->add_option("--data", sf.data, "training JSONL")->required();
  sft->add_option("--out", sf.out, "checkpoint path")->required();
  sft->add_option("--epochs", sf.epochs, "full-batch passes")->capture_default_str();
  sft->add_option("--lr", sf.lr, "base learning rate")->capture_default_str();
  sft->add_option("--lr-scale", sf.lr_scale, "SFT step multiplier")->capture_default_str();
  sft->add_option("--seed", sf.seed, "run seed")->capture_default_str();
  sft->add_option("--log", sf.log, "per-epoch loss JSONL path");
  sft->callback([&] {
    Dataset data = load_jsonl(sf.data);
    TrainConfig cfg;
    cfg.lr = sf.lr;
    cfg.epochs = sf.epochs;
    cfg.sft_lr_scale = sf.lr_scale;
    cfg.seed = sf.seed;

    RunManifest manifest;
    manifest.command_line = command_line;
    manifest.config_json = cfg.to_json();
    manifest.seed = cfg.seed;
    manifest.dataset_hash = rng::hex64(data.manifest.hash());
    manifest.save(sf.out + ".manifest.json");

    std::vector<SftEpochLog> log;
    PolicyParams params =
        sft_fit(data.records, PolicyParams::zeros(infer_k(data)), cfg, &log);
    save_checkpoint(params, CheckpointMeta{"sft", cfg.epochs, cfg.config_hash()}, sf.out);
    if (!sf.log.empty()) {
      std::string lines;
      for (const auto& e : log) {
        lines += "{\"epoch\":" + std::to_string(e.epoch) +
                 ",\"mean_nll\":" + fmt_double(e.mean_nll) + "}\n";
      }
      io::write_file(sf.log, lines);
    }
    std::cout << "checkpoint written: " << sf.out << "\n";
  });

  // grpo
  auto* grpo = app.add_subcommand("grpo", "group-relative policy optimization");
  struct {
    std::string data;
    std::string init;
    bool from_scratch = false;
    std::string out;
    std::string rewards = "acc,format,fact,cons";
    std::string run_dir;
    bool timing = false;
    TrainConfig cfg;
  } gr;
  gr.cfg.seed = 7;
  grpo->add_option("--data", gr.data, "training JSONL")->required();
  auto* init_opt = grpo->add_option("--init", gr.init, "initial checkpoint");
  grpo->add_flag("--from-scratch", gr.from_scratch, "start from zero weights")
      ->excludes(init_opt);
  grpo->add_option("--out", gr.out, "final checkpoint path")->required();
  grpo->add_option("--rewards", gr.rewards, "enabled components, comma-separated")
      ->capture_default_str();
  grpo->add_option("--group-size", gr.cfg.group_size, "rollouts per record")
      ->capture_default_str();
  grpo->add_option("--epochs", gr.cfg.epochs, "passes over the data")->capture_default_str();
  grpo->add_option("--lr", gr.cfg.lr, "learning rate")->capture_default_str();
  grpo->add_option("--clip-eps", gr.cfg.clip_eps, "surrogate clip width")->capture_default_str();
  grpo->add_option("--kl-beta", gr.cfg.kl_beta, "KL penalty weight")->capture_default_str();
  grpo->add_option("--mu", gr.cfg.inner_iters, "inner iterations per batch")
      ->capture_default_str();
  grpo->add_option("--adv-epsilon", gr.cfg.adv_epsilon, "advantage denominator epsilon")
      ->capture_default_str();
  grpo->add_option("--batch-size", gr.cfg.batch_size, "records per step, 0 = all")
      ->capture_default_str();
  grpo->add_option("--seed", gr.cfg.seed, "run seed")->capture_default_str();
  grpo->add_option("--run-dir", gr.run_dir, "directory for run log and epoch checkpoints");
  grpo->add_flag("--timing", gr.timing, "record real wallclock_ms in step logs");
  JudgeFlags gjf;
  add_judge_flags(grpo, gjf);
  grpo->callback([&] {
    if (gr.init.empty() && !gr.from_scratch) {
      throw CLI::ValidationError("--init", "provide an initial checkpoint or --from-scratch");
    }
    Dataset data = load_jsonl(gr.data);
    gr.cfg.mask = parse_mask(gr.rewards);
    gr.cfg.timing = gr.timing;
    std::unique_ptr<Judge> judge = make_judge(gjf, &gr.cfg.judge_mode);
    CachingJudge cached(*judge);

    PolicyParams init = gr.from_scratch ? PolicyParams::zeros(infer_k(data))
                                        : load_checkpoint(gr.init);

    RunManifest manifest;
    manifest.command_line = command_line;
    manifest.config_json = gr.cfg.to_json();
    manifest.seed = gr.cfg.seed;
    manifest.dataset_hash = rng::hex64(data.manifest.hash());
    if (!gr.init.empty()) manifest.checkpoint_hashes.emplace_back("init", io::file_hash(gr.init));
    if (!gr.run_dir.empty()) std::filesystem::create_directories(gr.run_dir);
    manifest.save(gr.run_dir.empty() ? gr.out + ".manifest.json"
                                     : gr.run_dir + "/run_manifest.json");

    TrainResult res = train_grpo(data.records, init, gr.cfg, cached, gr.run_dir);
    save_checkpoint(res.params, CheckpointMeta{"grpo", gr.cfg.epochs, gr.cfg.config_hash()},
                    gr.out);
    std::cout << "checkpoint written: " << gr.out << "\n";
  });

  // eval
  auto* ev = app.add_subcommand("eval", "greedy evaluation against gold or pseudo labels");
  struct {
    std::string data;
    std::string ckpt;
    std::string reference = "gold";
    std::string report;
    std::string csv;
    uint64_t seed = 0;
  } evf;
  ev->add_option("--data", evf.data, "evaluation JSONL")->required();
  ev->add_option("--ckpt", evf.ckpt, "policy checkpoint")->required();
  ev->add_option("--reference", evf.reference, "reference labels")
      ->check(CLI::IsMember({"gold", "pseudo"}))
      ->capture_default_str();
  ev->add_option("--report", evf.report, "markdown report path");
  ev->add_option("--csv", evf.csv, "CSV report path");
  ev->add_option("--seed", evf.seed, "unused; greedy decoding is deterministic");
  ev->callback([&] {
    Dataset data = load_jsonl(evf.data);
    PolicyParams params = load_checkpoint(evf.ckpt);
    const Reference ref = evf.reference == "gold" ? Reference::gold : Reference::pseudo;
    MetricsReport m = evaluate(params, data.records, ref, evf.seed);
    if (!evf.report.empty()) {
      std::string md = "| run | Acc. | Pre. | Rec. | F1 |\n|---|---|---|---|---|\n| eval | " +
                       fmt4(m.accuracy) + " | " + fmt4(m.precision) + " | " + fmt4(m.recall) +
                       " | " + fmt4(m.f1) + " |\n";
      io::write_file(evf.report, md);
    }
    if (!evf.csv.empty()) {
      std::string csv = "run,accuracy,precision,recall,f1,tp,fp,fn,tn,unparseable\neval," +
                        fmt_double(m.accuracy) + ',' + fmt_double(m.precision) + ',' +
                        fmt_double(m.recall) + ',' + fmt_double(m.f1) + ',' +
                        std::to_string(m.counts.tp) + ',' + std::to_string(m.counts.fp) + ',' +
                        std::to_string(m.counts.fn) + ',' + std::to_string(m.counts.tn) + ',' +
                        std::to_string(m.counts.unparseable) + '\n';
      io::write_file(evf.csv, csv);
    }
    std::cout << metrics_to_json(m) << "\n";
  });

  // reward
  auto* rw = app.add_subcommand("reward", "score one completion for one record");
  struct {
    std::string record_id;
    std::string data;
    std::string completion;
    std::string rewards = "acc,format,fact,cons";
  } rwf;
  rw->add_option("--record-id", rwf.record_id, "record id in the dataset")->required();
  rw->add_option("--data", rwf.data, "dataset JSONL")->required();
  rw->add_option("--completion", rwf.completion, "file holding the raw completion text")
      ->required();
  rw->add_option("--rewards", rwf.rewards, "enabled components, comma-separated")
      ->capture_default_str();
  rw->callback([&] {
    Dataset data = load_jsonl(rwf.data);
    const QARecord* record = nullptr;
    for (const auto& r : data.records) {
      if (r.id == rwf.record_id) {
        record = &r;
        break;
      }
    }
    if (!record) throw std::runtime_error("record id not found: " + rwf.record_id);
    const std::string raw = io::read_file(rwf.completion);
    const RewardMask mask = parse_mask(rwf.rewards);

    JudgeVerdict verdict;
    const JudgeVerdict* vptr = nullptr;
    if (mask.cons_on) {
      const ParsedCompletion parsed = parse_completion(raw);
      JudgeRequest req;
      req.id = record->id;
      req.question = record->question;
      req.reasoning = parsed.think_text;
      req.answer = parsed.answer_text;
      verdict = judge_local_rule(req);
      vptr = &verdict;
    }
    const RewardVector rv = total_reward(raw, *record, mask, vptr);
    std::cout << "{\"acc\":" << fmt_double(rv.acc) << ",\"format\":" << fmt_double(rv.format)
              << ",\"fact\":" << fmt_double(rv.fact) << ",\"cons\":" << fmt_double(rv.cons)
              << ",\"total\":" << fmt_double(rv.total) << ",\"mask\":\"" << rv.mask.describe()
              << "\"}\n";
  });

  const AblationConfig bench_defaults = default_benchmark_config(7);

  // ablate
  auto* ab = app.add_subcommand("ablate", "train and evaluate the standard six-row grid");
  struct {
    std::string data;
    std::string out_dir;
    uint64_t seed = 7;
    double train_frac;
    int sft_epochs;
    double sft_lr;
    int grpo_epochs;
    double grpo_lr;
    double kl_beta;
    int group_size;
    int batch_size;
    bool timing = false;
  } abf{.train_frac = bench_defaults.train_frac,
        .sft_epochs = bench_defaults.sft.epochs,
        .sft_lr = bench_defaults.sft.lr,
        .grpo_epochs = bench_defaults.grpo.epochs,
        .grpo_lr = bench_defaults.grpo.lr,
        .kl_beta = bench_defaults.grpo.kl_beta,
        .group_size = bench_defaults.grpo.group_size,
        .batch_size = bench_defaults.grpo.batch_size};
  ab->add_option("--data", abf.data, "dataset JSONL")->required();
  ab->add_option("--out-dir", abf.out_dir, "directory for checkpoints, logs and reports")
      ->required();
  ab->add_option("--seed", abf.seed, "shared seed for splits and all rows")
      ->capture_default_str();
  ab->add_option("--train-frac", abf.train_frac, "training split fraction")
      ->capture_default_str();
  ab->add_option("--sft-epochs", abf.sft_epochs, "SFT passes")->capture_default_str();
  ab->add_option("--sft-lr", abf.sft_lr, "SFT base learning rate")->capture_default_str();
  ab->add_option("--grpo-epochs", abf.grpo_epochs, "GRPO passes")->capture_default_str();
  ab->add_option("--grpo-lr", abf.grpo_lr, "GRPO learning rate")->capture_default_str();
  ab->add_option("--kl-beta", abf.kl_beta, "KL penalty weight")->capture_default_str();
  ab->add_option("--group-size", abf.group_size, "rollouts per record")->capture_default_str();
  ab->add_option("--batch-size", abf.batch_size, "records per GRPO step")
      ->capture_default_str();
  ab->add_flag("--timing", abf.timing, "record real wallclock_ms in step logs");
  ab->callback([&] {
    Dataset data = load_jsonl(abf.data);
    AblationConfig cfg;
    cfg.train_frac = abf.train_frac;
    cfg.sft.lr = abf.sft_lr;
    cfg.sft.epochs = abf.sft_epochs;
    cfg.sft.seed = abf.seed;
    cfg.grpo.lr = abf.grpo_lr;
    cfg.grpo.epochs = abf.grpo_epochs;
    cfg.grpo.kl_beta = abf.kl_beta;
    cfg.grpo.group_size = abf.group_size;
    cfg.grpo.batch_size = abf.batch_size;
    cfg.grpo.seed = abf.seed;
    cfg.grpo.timing = abf.timing;

    RunManifest manifest;
    manifest.command_line = command_line;
    manifest.config_json = "{\"sft\":" + cfg.sft.to_json() + ",\"grpo\":" + cfg.grpo.to_json() +
                           ",\"train_frac\":" + fmt_double(cfg.train_frac) + "}";
    manifest.seed = abf.seed;
    manifest.dataset_hash = rng::hex64(data.manifest.hash());
    std::filesystem::create_directories(abf.out_dir);
    manifest.save(abf.out_dir + "/run_manifest.json");

    LocalRuleJudge local;
    CachingJudge judge(local);
    AblationResult res = run_ablation(data, cfg, judge, default_ablation_grid(), abf.out_dir);
    std::cout << res.report_markdown;
  });

  // pseudo-study
  auto* ps = app.add_subcommand("pseudo-study",
                                "compare pseudo-label and gold-label supervision end to end");
  struct {
    std::string data;
    std::string out_dir;
    uint64_t seed = 7;
    double train_frac;
    int sft_epochs;
    double sft_lr;
    int grpo_epochs;
    double grpo_lr;
    double kl_beta;
    int group_size;
    int batch_size;
  } psf{.train_frac = bench_defaults.train_frac,
        .sft_epochs = bench_defaults.sft.epochs,
        .sft_lr = bench_defaults.sft.lr,
        .grpo_epochs = bench_defaults.grpo.epochs,
        .grpo_lr = bench_defaults.grpo.lr,
        .kl_beta = bench_defaults.grpo.kl_beta,
        .group_size = bench_defaults.grpo.group_size,
        .batch_size = bench_defaults.grpo.batch_size};
  ps->add_option("--data", psf.data, "dataset JSONL with gold labels")->required();
  ps->add_option("--out-dir", psf.out_dir, "directory for checkpoints and the report")
      ->required();
  ps->add_option("--seed", psf.seed, "shared seed")->capture_default_str();
  ps->add_option("--train-frac", psf.train_frac, "training split fraction")
      ->capture_default_str();
  ps->add_option("--sft-epochs", psf.sft_epochs, "SFT passes")->capture_default_str();
  ps->add_option("--sft-lr", psf.sft_lr, "SFT base learning rate")->capture_default_str();
  ps->add_option("--grpo-epochs", psf.grpo_epochs, "GRPO passes")->capture_default_str();
  ps->add_option("--grpo-lr", psf.grpo_lr, "GRPO learning rate")->capture_default_str();
  ps->add_option("--kl-beta", psf.kl_beta, "KL penalty weight")->capture_default_str();
  ps->add_option("--group-size", psf.group_size, "rollouts per record")->capture_default_str();
  ps->add_option("--batch-size", psf.batch_size, "records per GRPO step")
      ->capture_default_str();
  ps->callback([&] {
    Dataset data = load_jsonl(psf.data);
    AblationConfig cfg;
    cfg.train_frac = psf.train_frac;
    cfg.sft.lr = psf.sft_lr;
    cfg.sft.epochs = psf.sft_epochs;
    cfg.sft.seed = psf.seed;
    cfg.grpo.lr = psf.grpo_lr;
    cfg.grpo.epochs = psf.grpo_epochs;
    cfg.grpo.kl_beta = psf.kl_beta;
    cfg.grpo.group_size = psf.group_size;
    cfg.grpo.batch_size = psf.batch_size;
    cfg.grpo.seed = psf.seed;

    RunManifest manifest;
    manifest.command_line = command_line;
    manifest.config_json = "{\"sft\":" + cfg.sft.to_json() + ",\"grpo\":" + cfg.grpo.to_json() +
                           ",\"train_frac\":" + fmt_double(cfg.train_frac) + "}";
    manifest.seed = psf.seed;
    manifest.dataset_hash = rng::hex64(data.manifest.hash());
    std::filesystem::create_directories(psf.out_dir);
    manifest.save(psf.out_dir + "/run_manifest.json");

    LocalRuleJudge local;
    CachingJudge judge(local);
    PseudoStudyResult res = pseudo_label_study(data, cfg, judge, psf.out_dir);
    std::cout << res.report_markdown;
  });

  // mock-judge
  auto* mj = app.add_subcommand("mock-judge", "serve the judge wire protocol with scripted responses");
  struct {
    int port = 8089;
    std::string script;
  } mjf;
  mj->add_option("--port", mjf.port, "listen port, 0 picks a free one")->capture_default_str();
  mj->add_option("--script", mjf.script, "behavior script JSON");
  mj->callback([&] {
    MockJudgeScript script =
        mjf.script.empty() ? MockJudgeScript{} : MockJudgeScript::from_json_file(mjf.script);
    MockJudgeServer server(script);
    const int port = server.start(mjf.port);
    std::cout << "mock judge listening on 127.0.0.1:" << port << std::endl;
    for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
