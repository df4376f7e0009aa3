#pragma once

// Small helpers shared by the CSV readers and writers.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "cdpr/errors.hpp"

namespace cdpr::csv {

/// Appends a comma (unless first) and a round-trip exact decimal.
inline void append(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  if (!line.empty()) line += ',';
  line += buf;
}

inline void append(std::string& line, long v) {
  if (!line.empty()) line += ',';
  line += std::to_string(v);
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

/// Parses exactly `columns` finite doubles; throws FormatError naming the
/// line otherwise.
inline std::vector<double> parse_row(const std::string& raw, std::size_t columns,
                                     const std::string& source, std::size_t lineno) {
  const std::string line = strip_cr(raw);
  const std::string where = source + ":" + std::to_string(lineno) + ": ";
  std::vector<double> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    const std::string field =
        line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size()) {
      throw FormatError(where + "bad number '" + field + "'");
    }
    if (!std::isfinite(v)) throw FormatError(where + "non-finite value");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.size() != columns) {
    throw FormatError(where + "expected " + std::to_string(columns) +
                      " columns, got " + std::to_string(out.size()));
  }
  return out;
}

}  // namespace cdpr::csv
