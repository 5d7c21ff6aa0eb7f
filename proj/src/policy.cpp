#include "factrl/policy.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "factrl/jsonfmt.hpp"
#include "json.hpp"

namespace factrl {

namespace {

double dot(const std::vector<double>& w, const std::vector<double>& x) {
  double acc = 0.0;
  for (size_t i = 0; i < w.size(); ++i) acc += w[i] * x[i];
  return acc;
}

void check_shape(const PolicyParams& a, const PolicyParams& b, const char* who) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(who) + ": shape mismatch");
}

void check_choices(const Choices& c, int k, const char* who) {
  auto binary = [](int v) { return v == 0 || v == 1; };
  if (!binary(c.fmt_ok) || !binary(c.answer) || !binary(c.polarity)) {
    throw std::invalid_argument(std::string(who) + ": head choices must be 0 or 1");
  }
  if (static_cast<int>(c.mentions.size()) != k) {
    throw std::invalid_argument(std::string(who) + ": mentions length must equal k");
  }
  for (int m : c.mentions) {
    if (!binary(m)) throw std::invalid_argument(std::string(who) + ": mentions must be 0 or 1");
  }
}

// log P(y | p = sigmoid(z)) without forming p.
double head_logprob(double z, int y) { return y == 1 ? log_sigmoid(z) : log_sigmoid(-z); }

}  // namespace

PolicyParams PolicyParams::zeros(int k) {
  if (k < 1) throw std::invalid_argument("PolicyParams: k must be >= 1");
  PolicyParams p;
  p.k = k;
  const size_t d = static_cast<size_t>(k) + 1;
  p.w_fmt.assign(d, 0.0);
  p.w_ans.assign(d, 0.0);
  p.w_pol.assign(d, 0.0);
  p.W_concept.assign(static_cast<size_t>(k), std::vector<double>(d, 0.0));
  return p;
}

bool PolicyParams::same_shape(const PolicyParams& other) const {
  if (k != other.k) return false;
  const size_t d = static_cast<size_t>(k) + 1;
  if (w_fmt.size() != d || other.w_fmt.size() != d) return false;
  if (w_ans.size() != d || other.w_ans.size() != d) return false;
  if (w_pol.size() != d || other.w_pol.size() != d) return false;
  if (W_concept.size() != static_cast<size_t>(k) ||
      other.W_concept.size() != static_cast<size_t>(k)) {
    return false;
  }
  for (int i = 0; i < k; ++i) {
    if (W_concept[i].size() != d || other.W_concept[i].size() != d) return false;
  }
  return true;
}

bool PolicyParams::all_finite() const {
  auto ok = [](const std::vector<double>& v) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  };
  if (!ok(w_fmt) || !ok(w_ans) || !ok(w_pol)) return false;
  for (const auto& row : W_concept) {
    if (!ok(row)) return false;
  }
  return true;
}

void PolicyParams::axpy(double a, const PolicyParams& g) {
  check_shape(*this, g, "axpy");
  for (size_t i = 0; i < w_fmt.size(); ++i) w_fmt[i] += a * g.w_fmt[i];
  for (size_t i = 0; i < w_ans.size(); ++i) w_ans[i] += a * g.w_ans[i];
  for (size_t i = 0; i < w_pol.size(); ++i) w_pol[i] += a * g.w_pol[i];
  for (size_t r = 0; r < W_concept.size(); ++r) {
    for (size_t i = 0; i < W_concept[r].size(); ++i) {
      W_concept[r][i] += a * g.W_concept[r][i];
    }
  }
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

std::vector<double> features(const QARecord& record, int k) {
  if (!record.evidence) {
    throw std::invalid_argument("features: record " + record.id + " has no evidence vector");
  }
  if (static_cast<int>(record.evidence->size()) != k) {
    throw std::invalid_argument("features: record " + record.id + " evidence length " +
                                std::to_string(record.evidence->size()) +
                                ", expected " + std::to_string(k));
  }
  std::vector<double> x(*record.evidence);
  x.push_back(1.0);
  return x;
}

std::string render_completion(const Choices& choices, const QARecord& record) {
  std::string think = choices.polarity == 1 ? "presence of" : "no evidence of";
  bool first = true;
  for (size_t i = 0; i < choices.mentions.size(); ++i) {
    if (choices.mentions[i] != 1 || i >= record.concepts.size()) continue;
    think += first ? " " : ", ";
    think += record.concepts[i].surface;
    first = false;
  }
  const char* answer = choices.answer == 1 ? "yes" : "no";
  std::string out = "<think>";
  out += think;
  if (choices.fmt_ok == 1) out += "</think>";
  out += "<answer>";
  out += answer;
  out += "</answer>";
  return out;
}

Rollout sample(const PolicyParams& params, const QARecord& record, rng::Stream& stream) {
  const std::vector<double> x = features(record, params.k);
  Rollout r;
  r.choices.mentions.assign(params.k, 0);
  r.head_logprobs.reserve(params.k + 3);

  auto draw = [&](const std::vector<double>& w) {
    const double z = dot(w, x);
    const int y = stream.bernoulli(sigmoid(z)) ? 1 : 0;
    r.head_logprobs.push_back(head_logprob(z, y));
    return y;
  };

  r.choices.fmt_ok = draw(params.w_fmt);
  r.choices.answer = draw(params.w_ans);
  r.choices.polarity = draw(params.w_pol);
  for (int i = 0; i < params.k; ++i) r.choices.mentions[i] = draw(params.W_concept[i]);

  r.logprob = 0.0;
  for (double lp : r.head_logprobs) r.logprob += lp;
  r.raw_text = render_completion(r.choices, record);
  return r;
}

Choices greedy_choices(const PolicyParams& params, const QARecord& record) {
  const std::vector<double> x = features(record, params.k);
  Choices c;
  c.fmt_ok = dot(params.w_fmt, x) > 0.0 ? 1 : 0;
  c.answer = dot(params.w_ans, x) > 0.0 ? 1 : 0;
  c.polarity = dot(params.w_pol, x) > 0.0 ? 1 : 0;
  c.mentions.assign(params.k, 0);
  for (int i = 0; i < params.k; ++i) {
    c.mentions[i] = dot(params.W_concept[i], x) > 0.0 ? 1 : 0;
  }
  return c;
}

Rollout greedy_rollout(const PolicyParams& params, const QARecord& record) {
  Rollout r;
  r.choices = greedy_choices(params, record);
  const std::vector<double> x = features(record, params.k);
  r.head_logprobs.push_back(head_logprob(dot(params.w_fmt, x), r.choices.fmt_ok));
  r.head_logprobs.push_back(head_logprob(dot(params.w_ans, x), r.choices.answer));
  r.head_logprobs.push_back(head_logprob(dot(params.w_pol, x), r.choices.polarity));
  for (int i = 0; i < params.k; ++i) {
    r.head_logprobs.push_back(head_logprob(dot(params.W_concept[i], x), r.choices.mentions[i]));
  }
  r.logprob = 0.0;
  for (double lp : r.head_logprobs) r.logprob += lp;
  r.raw_text = render_completion(r.choices, record);
  return r;
}

double logprob(const PolicyParams& params, const QARecord& record, const Choices& choices) {
  check_choices(choices, params.k, "logprob");
  const std::vector<double> x = features(record, params.k);
  double lp = head_logprob(dot(params.w_fmt, x), choices.fmt_ok);
  lp += head_logprob(dot(params.w_ans, x), choices.answer);
  lp += head_logprob(dot(params.w_pol, x), choices.polarity);
  for (int i = 0; i < params.k; ++i) {
    lp += head_logprob(dot(params.W_concept[i], x), choices.mentions[i]);
  }
  return lp;
}

PolicyParams grad_logprob(const PolicyParams& params, const QARecord& record,
                          const Choices& choices) {
  check_choices(choices, params.k, "grad_logprob");
  const std::vector<double> x = features(record, params.k);
  PolicyParams g = PolicyParams::zeros(params.k);

  auto fill = [&x](std::vector<double>& gw, const std::vector<double>& w, int y) {
    const double coef = static_cast<double>(y) - sigmoid(dot(w, x));
    for (size_t i = 0; i < gw.size(); ++i) gw[i] = coef * x[i];
  };

  fill(g.w_fmt, params.w_fmt, choices.fmt_ok);
  fill(g.w_ans, params.w_ans, choices.answer);
  fill(g.w_pol, params.w_pol, choices.polarity);
  for (int i = 0; i < params.k; ++i) {
    fill(g.W_concept[i], params.W_concept[i], choices.mentions[i]);
  }
  return g;
}

std::string checkpoint_to_json(const PolicyParams& params, const CheckpointMeta& meta) {
  if (!params.all_finite()) {
    throw std::runtime_error("checkpoint_to_json: non-finite parameter");
  }
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(params.k) * params.d());
  for (const auto& row : params.W_concept) {
    flat.insert(flat.end(), row.begin(), row.end());
  }
  std::string out = "{\"version\":";
  out += std::to_string(params.version);
  out += ",\"k\":";
  out += std::to_string(params.k);
  out += ",\"d\":";
  out += std::to_string(params.d());
  out += ",\"w_ans\":";
  out += fmt_double_array(params.w_ans);
  out += ",\"w_fmt\":";
  out += fmt_double_array(params.w_fmt);
  out += ",\"w_pol\":";
  out += fmt_double_array(params.w_pol);
  out += ",\"W_concept\":";
  out += fmt_double_array(flat);
  out += ",\"stage\":\"";
  out += meta.stage;
  out += "\",\"epoch\":";
  out += std::to_string(meta.epoch);
  out += ",\"config_hash\":\"";
  out += meta.config_hash;
  out += "\"}";
  return out;
}

void save_checkpoint(const PolicyParams& params, const CheckpointMeta& meta,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << checkpoint_to_json(params, meta) << '\n';
}

PolicyParams load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint " + path + " is not valid JSON: " + e.what());
  }

  const int version = j.at("version").get<int>();
  if (version != 1) {
    throw std::runtime_error("checkpoint " + path + ": unsupported version " +
                             std::to_string(version));
  }
  const int k = j.at("k").get<int>();
  const int d = j.at("d").get<int>();
  if (k < 1 || d != k + 1) {
    throw std::runtime_error("checkpoint " + path + ": inconsistent dimensions");
  }

  PolicyParams p = PolicyParams::zeros(k);
  p.version = version;
  p.w_ans = j.at("w_ans").get<std::vector<double>>();
  p.w_fmt = j.at("w_fmt").get<std::vector<double>>();
  p.w_pol = j.at("w_pol").get<std::vector<double>>();
  const auto flat = j.at("W_concept").get<std::vector<double>>();
  if (p.w_ans.size() != static_cast<size_t>(d) || p.w_fmt.size() != static_cast<size_t>(d) ||
      p.w_pol.size() != static_cast<size_t>(d) ||
      flat.size() != static_cast<size_t>(k) * static_cast<size_t>(d)) {
    throw std::runtime_error("checkpoint " + path + ": weight arrays have wrong length");
  }
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < d; ++c) {
      p.W_concept[r][c] = flat[static_cast<size_t>(r) * d + c];
    }
  }
  if (!p.all_finite()) {
    throw std::runtime_error("checkpoint " + path + ": non-finite parameter");
  }
  if (meta) {
    meta->stage = j.value("stage", std::string("init"));
    meta->epoch = j.value("epoch", 0);
    meta->config_hash = j.value("config_hash", std::string());
  }
  return p;
}

}  // namespace factrl
