#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace rswitch {

/// Shortest round-trip decimal form of a double; "inf", "-inf", "nan" for
/// non-finite values. Locale-independent, so report files are byte-stable.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace rswitch
