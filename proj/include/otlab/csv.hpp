#pragma once

// Field <-> CSV. Header `x,value` (1D) or `x,y,value` (2D); one row per cell
// in grid index order (x fastest); `.` decimal, `,` delimiter, LF endings.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "otlab/error.hpp"
#include "otlab/geometry.hpp"

namespace otlab {

/// Shortest round-trippable representation, independent of the locale.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_field_csv(std::ostream& os, const Grid& grid, std::span<const double> values) {
  if (values.size() != grid.size()) throw Error(ErrorKind::shape, "field size does not match grid");
  os << (grid.dim() == 1 ? "x,value\n" : "x,y,value\n");
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Point c = grid.center(i);
    os << format_double(c[0]) << ',';
    if (grid.dim() == 2) os << format_double(c[1]) << ',';
    os << format_double(values[i]) << '\n';
  }
}

inline void write_field_csv(const std::filesystem::path& path, const Grid& grid, std::span<const double> values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::input, "cannot open " + path.string() + " for writing");
  write_field_csv(os, grid, values);
}

struct FieldData {
  Grid grid;
  std::vector<double> values;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  std::istringstream ss(s);
  ss.imbue(std::locale::classic());
  double v;
  if (!(ss >> v)) throw Error(ErrorKind::input, "not a number: '" + s + "'");
  return v;
}

// Recovers lower/upper bounds and the count of a uniform axis from the sorted
// distinct cell centers.
inline std::pair<std::pair<double, double>, int> axis_from_centers(std::vector<double> c) {
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end(), [](double a, double b) { return std::abs(a - b) <= 1e-12 * (1 + std::abs(a)); }),
          c.end());
  if (c.size() < 2) throw Error(ErrorKind::input, "cannot infer a grid axis from fewer than two cells");
  const int n = static_cast<int>(c.size());
  const double h = (c.back() - c.front()) / (n - 1);
  for (int i = 0; i < n; ++i)
    if (std::abs(c[i] - (c.front() + i * h)) > 1e-9 * (1 + std::abs(h) * n))
      throw Error(ErrorKind::input, "cell centers are not uniformly spaced");
  return {{c.front() - 0.5 * h, c.back() + 0.5 * h}, n};
}

}  // namespace detail

inline FieldData read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::input, "empty field file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int dim;
  if (line == "x,value")
    dim = 1;
  else if (line == "x,y,value")
    dim = 2;
  else
    throw Error(ErrorKind::input, "unexpected field header '" + line + "'");

  std::vector<Point> centers;
  std::vector<double> values;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) != dim + 1) throw Error(ErrorKind::input, "malformed field row '" + line + "'");
    Point p{detail::parse_double(cells[0]), dim == 2 ? detail::parse_double(cells[1]) : 0.0};
    centers.push_back(p);
    values.push_back(detail::parse_double(cells[dim]));
  }
  std::vector<double> xs, ys;
  for (const auto& p : centers) {
    xs.push_back(p[0]);
    ys.push_back(p[1]);
  }
  const auto [bx, nx] = detail::axis_from_centers(xs);
  Grid grid = dim == 1 ? Grid::line(bx.first, bx.second, nx) : [&] {
    const auto [by, ny] = detail::axis_from_centers(ys);
    return Grid::box({bx.first, by.first}, {bx.second, by.second}, {nx, ny});
  }();
  if (grid.size() != values.size()) throw Error(ErrorKind::input, "field rows do not fill a grid");
  const double tol = 1e-9 * grid.max_width();
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const Point c = grid.center(i);
    if (std::abs(c[0] - centers[i][0]) > tol || std::abs(c[1] - centers[i][1]) > tol)
      throw Error(ErrorKind::input, "field rows are not in grid order");
  }
  return {grid, std::move(values)};
}

inline FieldData read_field_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::input, "cannot open " + path.string());
  return read_field_csv(is);
}

/// `key=value` lines, keys sorted.
inline void write_key_values(const std::filesystem::path& path, const std::map<std::string, std::string>& kv) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::input, "cannot open " + path.string() + " for writing");
  for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
}

inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::input, "cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::input, "malformed key-value line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace otlab
