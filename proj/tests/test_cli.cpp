#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

CmdResult run_cli(const std::string& args) {
  const std::string cmd = std::string(FACTRL_BIN) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  CmdResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) res.output.append(buf.data(), got);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const std::string g_dir = [] {
  std::string d = "/tmp/factrl_test_cli";
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}();

}  // namespace

TEST_CASE("gen-data writes the dataset, hidden truth and manifest") {
  auto r = run_cli("gen-data --out " + g_dir + "/d.jsonl --n 60 --concepts 3 --noise 0.1 --seed 5");
  CHECK(r.exit_code == 0);
  CHECK(slurp(g_dir + "/d.jsonl").find("\"pseudo_label\"") != std::string::npos);
  CHECK(slurp(g_dir + "/d.truth.jsonl").find("\"true_evidence\"") != std::string::npos);
  auto manifest = nlohmann::json::parse(slurp(g_dir + "/d.manifest.json"));
  CHECK(manifest.at("record_count").get<int>() == 60);

  // regeneration is byte-stable
  auto again =
      run_cli("gen-data --out " + g_dir + "/d2.jsonl --n 60 --concepts 3 --noise 0.1 --seed 5");
  CHECK(again.exit_code == 0);
  CHECK(slurp(g_dir + "/d2.jsonl") == slurp(g_dir + "/d.jsonl"));
}

TEST_CASE("gen-data rejects an out-of-range noise level") {
  auto r = run_cli("gen-data --out " + g_dir + "/x.jsonl --n 10 --noise 1.5");
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("--noise") != std::string::npos);
}

TEST_CASE("sft then eval round trip through files") {
  auto s = run_cli("sft --data " + g_dir + "/d.jsonl --out " + g_dir +
                   "/sft.ckpt --epochs 120 --lr 1e-3 --seed 5 --log " + g_dir + "/sft_log.jsonl");
  CHECK(s.exit_code == 0);
  CHECK(slurp(g_dir + "/sft.ckpt").find("\"stage\":\"sft\"") != std::string::npos);
  CHECK(slurp(g_dir + "/sft.ckpt.manifest.json").find("dataset_hash") != std::string::npos);

  // per-epoch loss log is jsonl with decreasing nll
  std::istringstream log(slurp(g_dir + "/sft_log.jsonl"));
  std::string line;
  double prev = 1e18;
  int lines = 0;
  while (std::getline(log, line)) {
    auto j = nlohmann::json::parse(line);
    const double nll = j.at("mean_nll").get<double>();
    CHECK(nll < prev);
    prev = nll;
    ++lines;
  }
  CHECK(lines == 120);

  auto e = run_cli("eval --data " + g_dir + "/d.jsonl --ckpt " + g_dir +
                   "/sft.ckpt --reference gold");
  CHECK(e.exit_code == 0);
  auto metrics = nlohmann::json::parse(e.output);
  CHECK(metrics.at("counts").at("tp").get<int>() >= 0);
  CHECK(metrics.at("f1").get<double>() >= 0.0);
}

TEST_CASE("grpo trains from an sft checkpoint and logs its run") {
  auto g = run_cli("grpo --data " + g_dir + "/d.jsonl --init " + g_dir + "/sft.ckpt --out " +
                   g_dir + "/grpo.ckpt --rewards acc,format --epochs 2 --lr 0.1 --group-size 4 " +
                   "--seed 5 --run-dir " + g_dir + "/run");
  CHECK(g.exit_code == 0);
  CHECK(slurp(g_dir + "/grpo.ckpt").find("\"stage\":\"grpo\"") != std::string::npos);
  const std::string log = slurp(g_dir + "/run/run_log.jsonl");
  CHECK_FALSE(log.empty());
  auto first = nlohmann::json::parse(log.substr(0, log.find('\n')));
  CHECK(first.at("step").get<int>() == 0);
  CHECK(first.at("wallclock_ms").get<int>() == 0);
}

TEST_CASE("grpo requires exactly one starting point") {
  auto neither = run_cli("grpo --data " + g_dir + "/d.jsonl --out " + g_dir + "/x.ckpt");
  CHECK(neither.exit_code != 0);
  auto both = run_cli("grpo --data " + g_dir + "/d.jsonl --init " + g_dir +
                      "/sft.ckpt --from-scratch --out " + g_dir + "/x.ckpt");
  CHECK(both.exit_code != 0);
}

TEST_CASE("unknown reward names are refused with the valid set") {
  auto r = run_cli("grpo --data " + g_dir + "/d.jsonl --from-scratch --out " + g_dir +
                   "/x.ckpt --rewards acc,bogus");
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("bogus") != std::string::npos);
  CHECK(r.output.find("cons") != std::string::npos);
}

TEST_CASE("reward subcommand scores a completion file against a record") {
  std::ofstream(g_dir + "/completion.txt")
      << "<think>presence of concept_0</think><answer>yes</answer>";
  auto r = run_cli("reward --data " + g_dir + "/d.jsonl --record-id q000000 --completion " +
                   g_dir + "/completion.txt");
  CHECK(r.exit_code == 0);
  auto j = nlohmann::json::parse(r.output);
  CHECK(j.at("format").get<double>() == 1.0);
  CHECK(j.contains("total"));
  CHECK(j.at("mask").get<std::string>() == "acc+format+fact+cons");

  auto missing = run_cli("reward --data " + g_dir + "/d.jsonl --record-id nope --completion " +
                         g_dir + "/completion.txt");
  CHECK(missing.exit_code != 0);
}

TEST_CASE("a bad data path fails with a readable error") {
  auto r = run_cli("eval --data /nonexistent.jsonl --ckpt " + g_dir + "/sft.ckpt");
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("error") != std::string::npos);
}
