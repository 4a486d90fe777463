#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "otlab/cost.hpp"
#include "otlab/geometry.hpp"
#include "otlab/ot/result.hpp"

namespace otlab {

/// Default mass threshold below which a cell carries no map value.
inline double default_mass_threshold(const Grid& grid) { return 1e-10 / grid.cell_volume(); }

/// T(x) = x - grad h*(grad phi(x)) on cells with rho > mass_threshold, clipped
/// into the box. Throws a range error when |grad phi| leaves the range of
/// grad h on B(R) by more than `range_tolerance` (relative), which a
/// c-concave phi cannot do.
inline MapField transport_map_from_potential(const ScalarField& phi, const RadialCost& cost, const DensityField& rho,
                                             double mass_threshold = -1.0, double range_tolerance = 1e-6) {
  require_same_grid(phi.grid, rho.grid());
  const Grid& grid = phi.grid;
  if (mass_threshold < 0.0) mass_threshold = default_mass_threshold(grid);
  const auto grad = gradient(phi);
  const double limit = cost.slope_limit();
  MapField map{grid, std::vector<Point>(grid.size(), Point{0.0, 0.0}), std::vector<char>(grid.size(), 0)};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(rho[i] > mass_threshold)) continue;
    Point w = grad.values[i];
    const double s = norm(w);
    if (s > limit * (1.0 + range_tolerance))
      throw Error(ErrorKind::range, "potential gradient outside the range of grad h (potential not c-concave?)");
    if (s > limit) w = (limit / s) * w;
    const Point x = grid.center(i);
    const Point raw = x - cost.grad_star(w);
    const Point clipped = grid.clamp(raw);
    map.max_clip_distance = std::max(map.max_clip_distance, norm(raw - clipped));
    map.target[i] = clipped;
    map.mask[i] = 1;
  }
  return map;
}

struct MapConsistencyReport {
  /// |grad psi(T(x)) + grad h(x - T(x))|, rho-weighted.
  double median_psi_residual = 0.0;
  double p95_psi_residual = 0.0;
  double max_psi_residual = 0.0;
  /// |grad phi(x) - grad h(x - T(x))|, rho-weighted.
  double median_phi_residual = 0.0;
  double p95_phi_residual = 0.0;
  double max_phi_residual = 0.0;
  std::size_t cells = 0;
};

inline MapConsistencyReport map_consistency_check(const ScalarField& phi, const ScalarField& psi, const MapField& map,
                                                  const RadialCost& cost, const DensityField& rho) {
  require_same_grid(phi.grid, psi.grid);
  require_same_grid(phi.grid, map.grid);
  require_same_grid(phi.grid, rho.grid());
  const Grid& grid = phi.grid;
  const auto gphi = gradient(phi), gpsi = gradient(psi);
  std::vector<double> r_psi, r_phi, w;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!map.mask[i]) continue;
    const Point x = grid.center(i);
    const Point t = map.target[i];
    const Point dh = cost.grad(x - t);
    r_psi.push_back(norm(interpolate(gpsi, t) + dh));
    r_phi.push_back(norm(gphi.values[i] - dh));
    w.push_back(rho[i]);
  }
  MapConsistencyReport rep;
  rep.cells = w.size();
  if (w.empty()) return rep;
  rep.median_psi_residual = weighted_quantile(r_psi, w, 0.5);
  rep.p95_psi_residual = weighted_quantile(r_psi, w, 0.95);
  rep.max_psi_residual = *std::max_element(r_psi.begin(), r_psi.end());
  rep.median_phi_residual = weighted_quantile(r_phi, w, 0.5);
  rep.p95_phi_residual = weighted_quantile(r_phi, w, 0.95);
  rep.max_phi_residual = *std::max_element(r_phi.begin(), r_phi.end());
  return rep;
}

/// rho-weighted p-th quantile of |T1 - T2| over cells masked in both maps.
inline double map_discrepancy_quantile(const MapField& a, const MapField& b, const DensityField& rho, double q) {
  std::vector<double> d, w;
  for (std::size_t i = 0; i < a.target.size(); ++i) {
    if (!a.mask[i] || !b.mask[i]) continue;
    d.push_back(norm(a.target[i] - b.target[i]));
    w.push_back(rho[i]);
  }
  return weighted_quantile(d, w, q);
}

}  // namespace otlab
