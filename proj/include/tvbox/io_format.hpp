#pragma once

#include <cstdio>
#include <string>

namespace tvbox {

// Fixed float formatting for all output files: 17 significant digits is
// enough to round-trip IEEE doubles exactly.
inline std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace tvbox
