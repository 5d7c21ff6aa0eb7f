#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace factrl {

// A factual anchor phrase together with acceptable alternative surface
// forms. Stored normalized (see text::normalize).
struct ConceptEntry {
  std::string surface;
  std::vector<std::string> synonyms;
};

struct QARecord {
  std::string id;
  std::string question;
  std::string image_ref;  // opaque, carried but never dereferenced
  std::optional<int> gold_label;
  int pseudo_label = 0;
  std::vector<ConceptEntry> concepts;
  // Observed finding indicators, synthetic data only; length = concept slots.
  std::optional<std::vector<double>> evidence;
};

struct SynthParams {
  double noise = 0.0;
  double pos_frac = 0.5;
  uint64_t seed = 0;
};

struct DatasetManifest {
  size_t record_count = 0;
  double label_balance = 0.0;  // fraction of records with pseudo_label == 1
  int concept_slots = 0;       // evidence length when present, 0 otherwise
  std::optional<SynthParams> synthesis;
  std::string source_path;

  std::string to_json() const;
  uint64_t hash() const;
};

struct Dataset {
  std::vector<QARecord> records;
  DatasetManifest manifest;
};

// Hidden ground truth emitted alongside synthetic data for debugging and
// invariant checks; never consumed by training.
struct TruthEntry {
  std::string id;
  std::vector<int> true_evidence;
  int gold_label = 0;
};

struct SynthResult {
  Dataset dataset;
  std::vector<TruthEntry> truth;
};

// One JSON object per line. Malformed lines and invariant violations are
// reported with their line number.
Dataset load_jsonl(const std::string& path);

std::string to_jsonl(const std::vector<QARecord>& records);
void save_jsonl(const std::vector<QARecord>& records, const std::string& path);

std::string truth_to_jsonl(const std::vector<TruthEntry>& truth);

// Deterministic synthetic benchmark. Each record draws a latent binary
// evidence vector e; gold_label = 1 iff at least ceil(k/2) slots are set.
// The stored (observed) evidence and the pseudo label are the latent values
// with independent flip probability `noise`. Concepts name the latent
// positive slots, or a single "finding_absent" placeholder when there are
// none. Pure function of its arguments.
SynthResult synth_generate(size_t n, int k, double noise, double pos_frac,
                           uint64_t seed);

// Seeded shuffled partition; both halves non-empty.
std::pair<std::vector<QARecord>, std::vector<QARecord>> split(
    const std::vector<QARecord>& records, double train_frac, uint64_t seed);

}  // namespace factrl
