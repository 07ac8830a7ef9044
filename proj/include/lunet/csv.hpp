#pragma once

#include <charconv>
#include <string>

namespace lunet {

// Shortest round-trip decimal form; CSV output is byte-stable across runs.
inline std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace lunet
