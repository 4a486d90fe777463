#pragma once

// Finite-difference second-order diagnostics for the potentials.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "otlab/cost.hpp"
#include "otlab/geometry.hpp"
#include "otlab/ot/result.hpp"

namespace otlab {

struct SemiconcavityReport {
  /// Largest centered second difference over interior cells and axes.
  double max_second_difference = 0.0;
  double constant = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

/// PASS when max second difference <= C + tolerance_factor * dx * C.
inline SemiconcavityReport semiconcavity_check(const ScalarField& phi, const SemiconcavityBound& bound,
                                               double tolerance_factor = 10.0) {
  const Grid& grid = phi.grid;
  SemiconcavityReport rep;
  rep.constant = bound.constant;
  rep.tolerance = tolerance_factor * grid.max_width() * bound.constant;
  double worst = -std::numeric_limits<double>::infinity();
  const int nx = grid.count(0), ny = grid.count(1);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      for (int a = 0; a < grid.dim(); ++a) {
        const int i = a == 0 ? ix : iy;
        if (i == 0 || i == grid.count(a) - 1) continue;
        auto at = [&](int k) { return a == 0 ? phi.values[grid.index(k, iy)] : phi.values[grid.index(ix, k)]; };
        const double h = grid.width(a);
        worst = std::max(worst, (at(i + 1) - 2.0 * at(i) + at(i - 1)) / (h * h));
      }
  rep.max_second_difference = std::isfinite(worst) ? worst : 0.0;
  rep.pass = rep.max_second_difference <= rep.constant + rep.tolerance;
  return rep;
}

/// Symmetric 2x2 matrix (xx, xy, yy); in 1D only xx is used.
struct Sym2 {
  double xx = 0.0, xy = 0.0, yy = 0.0;
  Sym2 operator+(const Sym2& o) const { return {xx + o.xx, xy + o.xy, yy + o.yy}; }
  double largest_eigenvalue(int dim) const {
    if (dim == 1) return xx;
    const double m = 0.5 * (xx + yy), d = 0.5 * (xx - yy);
    return m + std::sqrt(d * d + xy * xy);
  }
};
inline Sym2 operator*(double s, const Sym2& a) { return {s * a.xx, s * a.xy, s * a.yy}; }

/// Centered second differences at cells at least one cell inside the box
/// (zero matrix elsewhere).
inline std::vector<Sym2> hessian_field(const ScalarField& f) {
  const Grid& grid = f.grid;
  const int nx = grid.count(0), ny = grid.count(1);
  std::vector<Sym2> out(grid.size());
  auto v = [&](int ix, int iy) { return f.values[grid.index(ix, iy)]; };
  const double hx = grid.width(0);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 1; ix + 1 < nx; ++ix) {
      Sym2& m = out[grid.index(ix, iy)];
      if (grid.dim() == 1) {
        m.xx = (v(ix + 1, 0) - 2.0 * v(ix, 0) + v(ix - 1, 0)) / (hx * hx);
        continue;
      }
      if (iy == 0 || iy + 1 == ny) continue;
      const double hy = grid.width(1);
      m.xx = (v(ix + 1, iy) - 2.0 * v(ix, iy) + v(ix - 1, iy)) / (hx * hx);
      m.yy = (v(ix, iy + 1) - 2.0 * v(ix, iy) + v(ix, iy - 1)) / (hy * hy);
      m.xy = (v(ix + 1, iy + 1) - v(ix + 1, iy - 1) - v(ix - 1, iy + 1) + v(ix - 1, iy - 1)) / (4.0 * hx * hy);
    }
  return out;
}

struct SecondOrderReport {
  /// rho-weighted 95th percentile of the largest eigenvalue of D2 phi(x) + D2 psi(T(x)).
  double p95 = 0.0;
  double median = 0.0;
  double max = 0.0;
  std::size_t cells = 0;
  double tolerance = 0.0;
  bool pass = true;
};

/// Cells x and targets T(x) closer than `margin_cells` cells to the boundary
/// are skipped. tolerance = tolerance_factor * dx * C.
inline SecondOrderReport second_order_check(const ScalarField& phi, const ScalarField& psi, const MapField& map,
                                            const DensityField& rho, double semiconcavity, double tolerance_factor = 20.0,
                                            int margin_cells = 2) {
  require_same_grid(phi.grid, psi.grid);
  require_same_grid(phi.grid, map.grid);
  require_same_grid(phi.grid, rho.grid());
  const Grid& grid = phi.grid;
  const auto hphi = hessian_field(phi), hpsi = hessian_field(psi);
  auto inside = [&](Point p) {
    for (int a = 0; a < grid.dim(); ++a) {
      const double m = margin_cells * grid.width(a);
      if (p[a] < grid.lower(a) + m || p[a] > grid.upper(a) - m) return false;
    }
    return true;
  };
  std::vector<double> values, weights;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!map.mask[i] || !inside(grid.center(i)) || !inside(map.target[i])) continue;
    const Sym2 at_t = interpolate<Sym2>(grid, map.target[i], [&](std::size_t k) { return hpsi[k]; });
    values.push_back((hphi[i] + at_t).largest_eigenvalue(grid.dim()));
    weights.push_back(rho[i]);
  }
  SecondOrderReport rep;
  rep.tolerance = tolerance_factor * grid.max_width() * semiconcavity;
  rep.cells = values.size();
  if (!values.empty()) {
    rep.p95 = weighted_quantile(values, weights, 0.95);
    rep.median = weighted_quantile(values, weights, 0.5);
    rep.max = *std::max_element(values.begin(), values.end());
  }
  rep.pass = rep.p95 <= rep.tolerance;
  return rep;
}

}  // namespace otlab
