#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "factrl/completion.hpp"
#include "factrl/policy.hpp"
#include "factrl/rng.hpp"

using namespace factrl;

namespace {

QARecord evidence_record(std::vector<double> evidence, int pseudo = 1) {
  QARecord r;
  r.id = "p1";
  r.question = "at least half the findings?";
  r.pseudo_label = pseudo;
  const int k = static_cast<int>(evidence.size());
  for (int i = 0; i < k; ++i) r.concepts.push_back({"concept_" + std::to_string(i), {}});
  r.evidence = std::move(evidence);
  return r;
}

PolicyParams random_params(int k, uint64_t seed) {
  auto s = rng::derive(seed, "test_params");
  PolicyParams p = PolicyParams::zeros(k);
  auto fill = [&s](std::vector<double>& w) {
    for (double& x : w) x = 2.0 * s.uniform01() - 1.0;
  };
  fill(p.w_fmt);
  fill(p.w_ans);
  fill(p.w_pol);
  for (auto& row : p.W_concept) fill(row);
  return p;
}

Choices choices_from_bits(int k, unsigned bits) {
  Choices c;
  c.fmt_ok = bits & 1;
  c.answer = (bits >> 1) & 1;
  c.polarity = (bits >> 2) & 1;
  c.mentions.resize(k);
  for (int i = 0; i < k; ++i) c.mentions[i] = (bits >> (3 + i)) & 1;
  return c;
}

}  // namespace

TEST_CASE("features appends a bias term") {
  auto r = evidence_record({1.0, 0.0, 1.0});
  auto x = features(r, 3);
  CHECK(x == std::vector<double>{1.0, 0.0, 1.0, 1.0});
}

TEST_CASE("features rejects missing or mis-sized evidence") {
  auto r = evidence_record({1.0, 0.0});
  CHECK_THROWS(features(r, 3));
  r.evidence.reset();
  CHECK_THROWS(features(r, 2));
}

TEST_CASE("renderer produces the canonical surface forms") {
  auto r = evidence_record({1.0, 1.0});
  Choices c;
  c.fmt_ok = 1;
  c.answer = 1;
  c.polarity = 1;
  c.mentions = {1, 1};
  CHECK(render_completion(c, r) ==
        "<think>presence of concept_0, concept_1</think><answer>yes</answer>");

  c.polarity = 0;
  c.answer = 0;
  c.mentions = {0, 1};
  CHECK(render_completion(c, r) == "<think>no evidence of concept_1</think><answer>no</answer>");

  c.mentions = {0, 0};
  CHECK(render_completion(c, r) == "<think>no evidence of</think><answer>no</answer>");
}

TEST_CASE("dropping the format bit breaks the grammar") {
  auto r = evidence_record({1.0});
  Choices c;
  c.fmt_ok = 0;
  c.answer = 1;
  c.polarity = 1;
  c.mentions = {1};
  const std::string raw = render_completion(c, r);
  CHECK(raw.find("</think>") == std::string::npos);
  CHECK_FALSE(parse_completion(raw).well_formed);
}

TEST_CASE("mention heads beyond the concept list render nothing") {
  auto r = evidence_record({1.0, 1.0, 1.0});
  r.concepts = {{"concept_0", {}}};  // fewer concepts than heads
  Choices c;
  c.fmt_ok = 1;
  c.answer = 1;
  c.polarity = 1;
  c.mentions = {1, 1, 1};
  CHECK(render_completion(c, r) == "<think>presence of concept_0</think><answer>yes</answer>");
}

TEST_CASE("render and parse agree for every choice assignment") {
  const int k = 3;
  auto r = evidence_record({1.0, 0.0, 1.0});
  for (unsigned bits = 0; bits < (1u << (k + 3)); ++bits) {
    Choices c = choices_from_bits(k, bits);
    const std::string raw = render_completion(c, r);
    auto parsed = parse_completion(raw);
    CHECK(parsed.well_formed == (c.fmt_ok == 1));
    auto bin = binarize(parsed.answer_text);
    REQUIRE(bin.value.has_value());
    CHECK(*bin.value == c.answer);
  }
}

TEST_CASE("sampling is reproducible and its logprob matches the evaluator") {
  auto r = evidence_record({1.0, 0.0, 1.0});
  auto p = random_params(3, 5);

  auto s1 = rng::derive(11, "roll", 0);
  auto s2 = rng::derive(11, "roll", 0);
  Rollout a = sample(p, r, s1);
  Rollout b = sample(p, r, s2);
  CHECK(a.raw_text == b.raw_text);
  CHECK(a.logprob == b.logprob);

  // independent recomputation, bit for bit
  CHECK(logprob(p, r, a.choices) == a.logprob);
  REQUIRE(a.head_logprobs.size() == 3 + 3);
  double sum = 0.0;
  for (double lp : a.head_logprobs) sum += lp;
  CHECK(sum == a.logprob);
}

TEST_CASE("head probabilities normalize over the full choice space") {
  const int k = 2;
  auto r = evidence_record({1.0, 0.0});
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    auto p = random_params(k, seed);
    double mass = 0.0;
    for (unsigned bits = 0; bits < (1u << (k + 3)); ++bits) {
      mass += std::exp(logprob(p, r, choices_from_bits(k, bits)));
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("zero parameters are maximally uncertain") {
  const int k = 2;
  auto r = evidence_record({1.0, 0.0});
  auto p = PolicyParams::zeros(k);
  Choices c = choices_from_bits(k, 0b10110);
  CHECK(logprob(p, r, c) == doctest::Approx((k + 3) * std::log(0.5)).epsilon(1e-15));

  // ties resolve to 0, so the greedy answer is "no"
  Choices g = greedy_choices(p, r);
  CHECK(g.fmt_ok == 0);
  CHECK(g.answer == 0);
  CHECK(g.polarity == 0);
}

TEST_CASE("greedy follows the sign of the head activations") {
  const int k = 2;
  auto r = evidence_record({1.0, 0.0});
  auto p = PolicyParams::zeros(k);
  p.w_fmt = {0.0, 0.0, 1.0};   // bias only: always well-formed
  p.w_ans = {2.0, 0.0, -1.0};  // fires on evidence slot 0
  p.w_pol = {0.0, 2.0, -1.0};  // fires on evidence slot 1, absent here
  Choices g = greedy_choices(p, r);
  CHECK(g.fmt_ok == 1);
  CHECK(g.answer == 1);
  CHECK(g.polarity == 0);

  Rollout roll = greedy_rollout(p, r);
  CHECK(roll.raw_text == render_completion(g, r));
  CHECK(roll.logprob == logprob(p, r, g));
}

TEST_CASE("grad_logprob matches central finite differences") {
  const int k = 3;
  auto r = evidence_record({1.0, 0.0, 1.0});
  auto p = random_params(k, 9);
  Choices c = choices_from_bits(k, 0b101101);
  PolicyParams g = grad_logprob(p, r, c);

  const double h = 1e-6;
  auto check_slot = [&](std::vector<double>& w, const std::vector<double>& gw, int j) {
    const double save = w[j];
    w[j] = save + h;
    const double up = logprob(p, r, c);
    w[j] = save - h;
    const double dn = logprob(p, r, c);
    w[j] = save;
    const double fd = (up - dn) / (2 * h);
    CHECK(gw[j] == doctest::Approx(fd).epsilon(1e-6));
  };
  for (int j = 0; j <= k; ++j) {
    check_slot(p.w_fmt, g.w_fmt, j);
    check_slot(p.w_ans, g.w_ans, j);
    check_slot(p.w_pol, g.w_pol, j);
    for (int row = 0; row < k; ++row) check_slot(p.W_concept[row], g.W_concept[row], j);
  }
}

TEST_CASE("axpy accumulates in place and same_shape guards it") {
  auto p = PolicyParams::zeros(2);
  auto g = PolicyParams::zeros(2);
  g.w_ans = {1.0, 2.0, 3.0};
  p.axpy(0.5, g);
  CHECK(p.w_ans == std::vector<double>{0.5, 1.0, 1.5});
  CHECK(p.all_finite());

  auto wrong = PolicyParams::zeros(3);
  CHECK_FALSE(p.same_shape(wrong));
  CHECK_THROWS(p.axpy(1.0, wrong));
}

TEST_CASE("checkpoints round trip bit for bit") {
  auto p = random_params(3, 33);
  CheckpointMeta meta{"sft", 12, "0123456789abcdef"};
  const std::string path = "/tmp/factrl_test_ckpt.json";
  save_checkpoint(p, meta, path);

  CheckpointMeta back;
  PolicyParams q = load_checkpoint(path, &back);
  CHECK(checkpoint_to_json(q, back) == checkpoint_to_json(p, meta));
  CHECK(back.stage == "sft");
  CHECK(back.epoch == 12);
  CHECK(back.config_hash == "0123456789abcdef");
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loading validates shape and finiteness") {
  const std::string path = "/tmp/factrl_test_ckpt_bad.json";

  auto p = random_params(2, 1);
  std::string good = checkpoint_to_json(p, CheckpointMeta{});

  SUBCASE("version mismatch") {
    std::string bad = good;
    auto pos = bad.find("\"version\":1");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 11, "\"version\":9");
    FILE* f = std::fopen(path.c_str(), "w");
    std::fwrite(bad.data(), 1, bad.size(), f);
    std::fclose(f);
    CHECK_THROWS(load_checkpoint(path));
  }
  SUBCASE("non-finite weight") {
    std::string bad = good;
    auto pos = bad.find("\"w_ans\":[");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos + 9, bad.find(',', pos + 9) - pos - 9, "1e999");
    FILE* f = std::fopen(path.c_str(), "w");
    std::fwrite(bad.data(), 1, bad.size(), f);
    std::fclose(f);
    CHECK_THROWS(load_checkpoint(path));
  }
  std::remove(path.c_str());
}
