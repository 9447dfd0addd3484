#pragma once

#include <charconv>
#include <string>
#include <system_error>

#include "common/errors.hpp"

namespace bayesrx::sim {

// Shortest round-trip decimal form; locale-independent, so CSV and SVG
// output is byte-stable across environments.
inline std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& context) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw IoError(context + ": bad numeric field '" + s + "'");
  }
  return x;
}

}  // namespace bayesrx::sim
