#pragma once

#include <cstdio>
#include <string>

namespace survkan {

/// Doubles rendered with 17 significant digits round-trip exactly.
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace survkan
