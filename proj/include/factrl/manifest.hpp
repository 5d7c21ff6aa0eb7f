#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace factrl {

inline constexpr const char* kToolVersion = "0.1.0";

namespace io {
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
// fnv1a over the file bytes, as 16 hex chars.
std::string file_hash(const std::string& path);
}  // namespace io

// Provenance record written before any training starts. The one stateful
// output allowed to carry paths; everything byte-compared across runs
// (checkpoints, logs, reports) stays path-free.
struct RunManifest {
  std::string command_line;
  std::string config_json;
  uint64_t seed = 0;
  std::string dataset_hash;  // dataset manifest hash, 16 hex chars
  std::vector<std::pair<std::string, std::string>> checkpoint_hashes;  // name -> hash
  std::string tool_version = kToolVersion;

  std::string to_json() const;
  void save(const std::string& path) const;
};

}  // namespace factrl
