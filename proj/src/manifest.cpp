#include "factrl/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "factrl/rng.hpp"
#include "json.hpp"

namespace factrl {

namespace io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::string file_hash(const std::string& path) {
  return rng::hex64(rng::fnv1a(read_file(path)));
}

}  // namespace io

std::string RunManifest::to_json() const {
  nlohmann::ordered_json o;
  o["tool_version"] = tool_version;
  o["command_line"] = command_line;
  o["seed"] = seed;
  o["dataset_hash"] = dataset_hash;
  if (!config_json.empty()) {
    o["config"] = nlohmann::ordered_json::parse(config_json);
  } else {
    o["config"] = nullptr;
  }
  nlohmann::ordered_json ck = nlohmann::ordered_json::object();
  for (const auto& [name, hash] : checkpoint_hashes) ck[name] = hash;
  o["checkpoint_hashes"] = std::move(ck);
  return o.dump(2);
}

void RunManifest::save(const std::string& path) const { io::write_file(path, to_json() + "\n"); }

}  // namespace factrl
