#include "factrl/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "factrl/rng.hpp"
#include "factrl/text.hpp"
#include "json.hpp"

namespace factrl {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void fail_at(const std::string& path, size_t line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

int require_label(const nlohmann::json& v, const std::string& path, size_t line,
                  const char* field) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    fail_at(path, line, std::string(field) + " must be an integer");
  }
  const long long label = v.get<long long>();
  if (label != 0 && label != 1) {
    fail_at(path, line, std::string(field) + " out of range, expected 0 or 1");
  }
  return static_cast<int>(label);
}

ConceptEntry parse_concept(const nlohmann::json& c, const std::string& path, size_t line) {
  ConceptEntry entry;
  if (!c.is_object() || !c.contains("surface")) {
    fail_at(path, line, "concept entries require a surface field");
  }
  entry.surface = text::normalize(c.at("surface").get<std::string>());
  if (entry.surface.empty()) {
    fail_at(path, line, "concept surface is empty after normalization");
  }
  if (c.contains("synonyms")) {
    for (const auto& s : c.at("synonyms")) {
      std::string syn = text::normalize(s.get<std::string>());
      if (syn.empty()) fail_at(path, line, "concept synonym is empty after normalization");
      if (syn == entry.surface) {
        fail_at(path, line, "concept synonym duplicates the surface form");
      }
      entry.synonyms.push_back(std::move(syn));
    }
  }
  return entry;
}

DatasetManifest manifest_for(const std::vector<QARecord>& records) {
  DatasetManifest m;
  m.record_count = records.size();
  size_t positives = 0;
  for (const auto& r : records) {
    if (r.pseudo_label == 1) ++positives;
    if (r.evidence) m.concept_slots = static_cast<int>(r.evidence->size());
  }
  m.label_balance = records.empty() ? 0.0 : static_cast<double>(positives) / records.size();
  return m;
}

ojson record_to_json(const QARecord& r) {
  ojson o;
  o["id"] = r.id;
  o["question"] = r.question;
  o["image_ref"] = r.image_ref;
  if (r.gold_label) o["gold_label"] = *r.gold_label;
  o["pseudo_label"] = r.pseudo_label;
  ojson concepts = ojson::array();
  for (const auto& c : r.concepts) {
    ojson co;
    co["surface"] = c.surface;
    co["synonyms"] = c.synonyms;
    concepts.push_back(std::move(co));
  }
  o["concepts"] = std::move(concepts);
  if (r.evidence) o["evidence"] = *r.evidence;
  return o;
}

}  // namespace

std::string DatasetManifest::to_json() const {
  ojson o;
  o["record_count"] = record_count;
  o["label_balance"] = label_balance;
  o["concept_slots"] = concept_slots;
  o["synthetic"] = synthesis.has_value();
  if (synthesis) {
    o["noise"] = synthesis->noise;
    o["pos_frac"] = synthesis->pos_frac;
    o["seed"] = synthesis->seed;
  } else {
    o["source"] = source_path;
  }
  return o.dump();
}

uint64_t DatasetManifest::hash() const { return rng::fnv1a(to_json()); }

Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  Dataset ds;
  std::unordered_set<std::string> seen_ids;
  int evidence_len = -1;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail_at(path, line_no, std::string("malformed JSON: ") + e.what());
    }
    QARecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.question = j.value("question", std::string());
      r.image_ref = j.value("image_ref", std::string());
      r.pseudo_label = require_label(j.at("pseudo_label"), path, line_no, "pseudo_label");
      if (j.contains("gold_label")) {
        r.gold_label = require_label(j.at("gold_label"), path, line_no, "gold_label");
      }
      if (j.contains("concepts")) {
        for (const auto& c : j.at("concepts")) {
          r.concepts.push_back(parse_concept(c, path, line_no));
        }
      }
      if (j.contains("evidence")) {
        r.evidence = j.at("evidence").get<std::vector<double>>();
      }
    } catch (const nlohmann::json::exception& e) {
      fail_at(path, line_no, std::string("invalid record: ") + e.what());
    }
    if (r.id.empty()) fail_at(path, line_no, "empty id");
    if (r.question.empty()) fail_at(path, line_no, "empty question");
    if (!seen_ids.insert(r.id).second) fail_at(path, line_no, "duplicate id: " + r.id);
    if (r.evidence) {
      const int len = static_cast<int>(r.evidence->size());
      if (evidence_len >= 0 && len != evidence_len) {
        fail_at(path, line_no, "inconsistent evidence length");
      }
      evidence_len = len;
    }
    ds.records.push_back(std::move(r));
  }
  ds.manifest = manifest_for(ds.records);
  ds.manifest.source_path = path;
  return ds;
}

std::string to_jsonl(const std::vector<QARecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

void save_jsonl(const std::vector<QARecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  out << to_jsonl(records);
}

std::string truth_to_jsonl(const std::vector<TruthEntry>& truth) {
  std::string out;
  for (const auto& t : truth) {
    ojson o;
    o["id"] = t.id;
    o["true_evidence"] = t.true_evidence;
    o["gold_label"] = t.gold_label;
    out += o.dump();
    out += '\n';
  }
  return out;
}

SynthResult synth_generate(size_t n, int k, double noise, double pos_frac,
                           uint64_t seed) {
  if (n < 1) throw std::invalid_argument("synth_generate: n must be >= 1");
  if (k < 1) throw std::invalid_argument("synth_generate: k must be >= 1");
  if (noise < 0.0 || noise > 1.0) {
    throw std::invalid_argument("synth_generate: noise must lie in [0,1]");
  }
  if (pos_frac < 0.0 || pos_frac > 1.0) {
    throw std::invalid_argument("synth_generate: pos_frac must lie in [0,1]");
  }

  const int majority_need = (k + 1) / 2;
  SynthResult out;
  out.dataset.records.reserve(n);
  out.truth.reserve(n);

  for (size_t i = 0; i < n; ++i) {
    auto stream = rng::derive(seed, "synth", i);
    const int gold = stream.bernoulli(pos_frac) ? 1 : 0;

    // Latent evidence drawn uniformly, conditioned on the majority rule
    // matching the desired label.
    std::vector<int> latent(k);
    for (;;) {
      int ones = 0;
      for (int s = 0; s < k; ++s) {
        latent[s] = stream.bernoulli(0.5) ? 1 : 0;
        ones += latent[s];
      }
      if ((ones >= majority_need ? 1 : 0) == gold) break;
    }

    QARecord r;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "q%06zu", i);
    r.id = idbuf;
    r.question = "Does record " + r.id + " exhibit at least half of the tracked findings?";
    r.image_ref = "img://" + r.id;
    r.gold_label = gold;

    std::vector<double> observed(k);
    for (int s = 0; s < k; ++s) {
      const int flipped = stream.bernoulli(noise) ? 1 - latent[s] : latent[s];
      observed[s] = static_cast<double>(flipped);
    }
    r.evidence = std::move(observed);
    r.pseudo_label = stream.bernoulli(noise) ? 1 - gold : gold;

    for (int s = 0; s < k; ++s) {
      if (latent[s] == 1) {
        r.concepts.push_back(ConceptEntry{"concept_" + std::to_string(s), {}});
      }
    }
    if (r.concepts.empty()) {
      r.concepts.push_back(ConceptEntry{"finding_absent", {}});
    }

    out.truth.push_back(TruthEntry{r.id, latent, gold});
    out.dataset.records.push_back(std::move(r));
  }

  out.dataset.manifest = manifest_for(out.dataset.records);
  out.dataset.manifest.concept_slots = k;
  out.dataset.manifest.synthesis = SynthParams{noise, pos_frac, seed};
  return out;
}

std::pair<std::vector<QARecord>, std::vector<QARecord>> split(
    const std::vector<QARecord>& records, double train_frac, uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw std::invalid_argument("split: train_frac must lie in (0,1)");
  }
  const size_t n = records.size();
  if (n < 2) throw std::invalid_argument("split: need at least 2 records");

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  auto stream = rng::derive(seed, "split");
  for (size_t i = n - 1; i > 0; --i) {
    const size_t j = stream.below(i + 1);
    std::swap(order[i], order[j]);
  }

  size_t train_count = static_cast<size_t>(std::floor(train_frac * static_cast<double>(n)));
  if (train_count < 1) train_count = 1;
  if (train_count > n - 1) train_count = n - 1;

  std::pair<std::vector<QARecord>, std::vector<QARecord>> out;
  out.first.reserve(train_count);
  out.second.reserve(n - train_count);
  for (size_t i = 0; i < n; ++i) {
    (i < train_count ? out.first : out.second).push_back(records[order[i]]);
  }
  return out;
}

}  // namespace factrl
