#pragma once

// The integral  sum_cells [grad rho . grad H(grad phi) + grad g . grad H(grad psi)] * vol
// and its boundary counterpart.

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "otlab/cost.hpp"
#include "otlab/geometry.hpp"

namespace otlab {

inline VectorField apply_grad_H(const VectorField& v, const HFunction& H) {
  VectorField out{v.grid, std::vector<Point>(v.values.size())};
  for (std::size_t i = 0; i < v.values.size(); ++i) out.values[i] = H.grad(v.values[i]);
  return out;
}

/// Per-cell integrand (without the cell volume).
inline std::vector<double> five_gradients_integrand(const DensityField& rho, const DensityField& g, const ScalarField& phi,
                                                    const ScalarField& psi, const HFunction& H) {
  require_same_grid(rho.grid(), g.grid());
  require_same_grid(rho.grid(), phi.grid);
  require_same_grid(rho.grid(), psi.grid);
  const auto dr = gradient(rho), dg = gradient(g);
  const auto hphi = apply_grad_H(gradient(phi), H), hpsi = apply_grad_H(gradient(psi), H);
  std::vector<double> out(rho.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dot(dr.values[i], hphi.values[i]) + dot(dg.values[i], hpsi.values[i]);
  return out;
}

inline double five_gradients_lhs(const DensityField& rho, const DensityField& g, const ScalarField& phi,
                                 const ScalarField& psi, const HFunction& H) {
  double s = 0.0;
  for (double v : five_gradients_integrand(rho, g, phi, psi, H)) s += v;
  return s * rho.grid().cell_volume();
}

/// sum over boundary facets of (rho grad H(grad phi) . n + g grad H(grad psi) . n) * area,
/// with the one-sided boundary gradients.
inline double boundary_flux(const DensityField& rho, const DensityField& g, const ScalarField& phi,
                            const ScalarField& psi, const HFunction& H) {
  require_same_grid(rho.grid(), g.grid());
  require_same_grid(rho.grid(), phi.grid);
  require_same_grid(rho.grid(), psi.grid);
  const auto gphi = gradient(phi), gpsi = gradient(psi);
  double s = 0.0;
  for (const auto& f : boundary_cells_and_normals(rho.grid())) {
    const double a = rho[f.cell] * dot(H.grad(gphi.values[f.cell]), f.normal);
    const double b = g[f.cell] * dot(H.grad(gpsi.values[f.cell]), f.normal);
    s += (a + b) * f.area;
  }
  return s;
}

struct BoundarySignReport {
  /// Smallest grad h*(grad phi) . n over the checked facets (+inf if none).
  double min_normal_component = std::numeric_limits<double>::infinity();
  std::size_t facets = 0;
  double tolerance = 0.0;
  bool pass = true;
};

/// grad h*(grad phi) . n >= -tolerance at boundary facets whose cell has
/// rho > density_threshold. Gradients beyond the range of grad h are pulled
/// back onto it first.
inline BoundarySignReport boundary_sign_check(const ScalarField& phi, const RadialCost& cost, const DensityField& rho,
                                              double density_threshold, double tolerance) {
  require_same_grid(phi.grid, rho.grid());
  const auto gphi = gradient(phi);
  const double limit = cost.slope_limit();
  BoundarySignReport rep;
  rep.tolerance = tolerance;
  for (const auto& f : boundary_cells_and_normals(phi.grid)) {
    if (!(rho[f.cell] > density_threshold)) continue;
    Point w = gphi.values[f.cell];
    const double s = norm(w);
    if (s > limit) w = (limit / s) * w;
    rep.min_normal_component = std::min(rep.min_normal_component, dot(cost.grad_star(w), f.normal));
    ++rep.facets;
  }
  rep.pass = rep.facets == 0 || rep.min_normal_component >= -tolerance;
  return rep;
}

}  // namespace otlab
