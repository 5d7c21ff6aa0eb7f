#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace factrl {

// Checkpoints, run logs and reports are byte-compared across runs, so all
// floating-point output goes through this one formatter: 17 significant
// digits, enough to round-trip any double.
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline std::string fmt_double_array(const std::vector<double>& values) {
  std::string out = "[";
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt_double(values[i]);
  }
  out += ']';
  return out;
}

}  // namespace factrl
