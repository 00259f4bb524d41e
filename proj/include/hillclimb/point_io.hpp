#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "hillclimb/trajectory.hpp"

namespace hillclimb {

/// Reads comma-separated points, one per line. Blank lines and lines starting
/// with '#' are skipped; a first line that does not parse as numbers is taken
/// as a header. All rows must have the same number of columns.
inline std::vector<Point> read_points_csv(std::istream& in, const std::string& name = "<stream>") {
  std::vector<Point> out;
  std::string line;
  std::size_t lineno = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    bool ok = true;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      while (p < end && *p == ' ') ++p;
      double v = 0.0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) {
        ok = false;
        break;
      }
      row.push_back(v);
      p = res.ptr;
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      if (*p != ',') {
        ok = false;
        break;
      }
      ++p;
    }
    if (!ok) {
      if (out.empty() && dim < 0) {
        dim = 0;  // header
        continue;
      }
      throw InputError(name + ":" + std::to_string(lineno) + ": malformed number");
    }
    if (dim <= 0) dim = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != dim) {
      throw InputError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) + " columns");
    }
    out.push_back(Eigen::Map<const Point>(row.data(), dim));
  }
  if (out.empty()) throw InputError(name + ": no points");
  return out;
}

inline std::vector<Point> read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_points_csv(in, path);
}

/// Writes one point per row, no header, 17 significant digits.
inline void write_points_csv(std::ostream& out, const std::vector<Point>& points) {
  const auto d = points.empty() ? 0 : points.front().size();
  for (const auto& p : points) {
    for (Eigen::Index j = 0; j < d; ++j) out << (j ? "," : "") << format_double(p(j));
    out << '\n';
  }
}

}  // namespace hillclimb
