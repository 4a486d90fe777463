#pragma once

#include <cstddef>
#include <cstdlib>
#include <span>
#include <vector>

#include "otlab/cost.hpp"
#include "otlab/geometry.hpp"

namespace otlab {

/// Dense matrix c_ij = h(x_i - y_j), row = source cell, column = target cell.
class CostMatrix {
 public:
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw Error(ErrorKind::shape, "cost matrix data size mismatch");
  }

  /// Source and target both on `grid`. h only depends on the index offset of a
  /// uniform grid, so the profile is evaluated once per distinct offset.
  static CostMatrix on_grid(const Grid& grid, const RadialCost& cost) {
    const int nx = grid.count(0), ny = grid.count(1);
    const double wx = grid.width(0), wy = grid.dim() == 2 ? grid.width(1) : 0.0;
    std::vector<double> table(static_cast<std::size_t>(nx) * ny);
    for (int dy = 0; dy < ny; ++dy)
      for (int dx = 0; dx < nx; ++dx) table[static_cast<std::size_t>(dy) * nx + dx] = cost(Point{dx * wx, dy * wy});
    const std::size_t n = grid.size();
    std::vector<double> data(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ci = grid.coords(i);
      for (std::size_t j = 0; j < n; ++j) {
        const auto cj = grid.coords(j);
        data[i * n + j] = table[static_cast<std::size_t>(std::abs(ci[1] - cj[1])) * nx + std::abs(ci[0] - cj[0])];
      }
    }
    return CostMatrix(n, n, std::move(data));
  }

  static CostMatrix between(std::span<const Point> sources, std::span<const Point> targets, const RadialCost& cost) {
    std::vector<double> data(sources.size() * targets.size());
    for (std::size_t i = 0; i < sources.size(); ++i)
      for (std::size_t j = 0; j < targets.size(); ++j) data[i * targets.size() + j] = cost(sources[i] - targets[j]);
    return CostMatrix(sources.size(), targets.size(), std::move(data));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  double max() const {
    double m = 0.0;
    for (double c : data_) m = std::max(m, c);
    return m;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

}  // namespace otlab
