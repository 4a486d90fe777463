#pragma once

// One-dimensional reference solver. For a strictly convex h(x - y) on the line
// the optimal plan is the monotone rearrangement, both between the discrete
// cell masses and between the piecewise-constant densities.

#include <algorithm>
#include <vector>

#include "otlab/ot/c_transform.hpp"
#include "otlab/ot/result.hpp"

namespace otlab {

/// North-west corner rule in index order: the monotone plan between two mass
/// vectors on ordered supports. Only positive entries are returned.
inline std::vector<CouplingEntry> monotone_coupling(std::span<const double> a, std::span<const double> b) {
  std::vector<CouplingEntry> out;
  std::vector<double> ra(a.begin(), a.end()), rb(b.begin(), b.end());
  double sa = 0.0, sb = 0.0;
  for (double v : ra) sa += v;
  for (double v : rb) sb += v;
  if (sb > 0.0)
    for (double& v : rb) v *= sa / sb;
  std::size_t i = 0, j = 0;
  while (i < ra.size() && j < rb.size()) {
    const double m = std::min(ra[i], rb[j]);
    if (m > 0.0) out.push_back({i, j, m});
    ra[i] -= m;
    rb[j] -= m;
    if (i + 1 == ra.size() && j + 1 == rb.size()) break;
    if (i + 1 == ra.size())
      ++j;
    else if (j + 1 == rb.size() || ra[i] <= rb[j])
      ++i;
    else
      ++j;
  }
  return out;
}

/// Quantile map T = G^{-1} o F at the cell centers of a 1D grid, with F and G
/// the piecewise-linear CDFs of the two cellwise-constant densities and G^{-1}
/// the left-continuous generalized inverse.
inline std::vector<double> quantile_map(const Grid& grid, std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  std::vector<double> F(n + 1, 0.0), G(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    F[k + 1] = F[k] + a[k];
    G[k + 1] = G[k] + b[k];
  }
  const double fa = F[n], gb = G[n];
  for (auto& v : F) v /= fa;
  for (auto& v : G) v /= gb;
  const double lo = grid.lower(0), h = grid.width(0);
  std::vector<double> T(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 0.5 * (F[i] + F[i + 1]);
    const auto it = std::lower_bound(G.begin() + 1, G.end(), s);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - G.begin()) - 1, n - 1);
    const double mass = G[k + 1] - G[k];
    const double frac = mass > 0.0 ? std::clamp((s - G[k]) / mass, 0.0, 1.0) : 0.0;
    T[i] = lo + (static_cast<double>(k) + frac) * h;
  }
  return T;
}

struct Exact1DSolution {
  TransportResult result;
  MapField map;
};

/// Monotone plan between the cell masses, quantile map between the
/// densities, phi from integrating phi' = h'(x - T(x)) from the left, psi its
/// c-bar-transform.
inline Exact1DSolution solve_exact_1d(const DensityField& rho, const DensityField& g, const RadialCost& cost,
                                      double mass_threshold = -1.0) {
  require_same_grid(rho.grid(), g.grid());
  const Grid& grid = rho.grid();
  if (grid.dim() != 1) throw Error(ErrorKind::dimension, "the exact solver is one-dimensional");
  if (grid.count(0) < 2) throw Error(ErrorKind::shape, "the exact solver needs at least two cells");
  const auto a = rho.cell_masses(), b = g.cell_masses();
  require_same_mass(a, b);
  const auto c = CostMatrix::on_grid(grid, cost);
  const std::size_t n = grid.size();

  const auto T = quantile_map(grid, a, b);
  std::vector<double> phi(n, 0.0);
  auto slope_at = [&](std::size_t i) { return cost.grad(Point{grid.center(i)[0] - T[i], 0.0})[0]; };
  double prev = slope_at(0);
  for (std::size_t i = 1; i < n; ++i) {
    const double cur = slope_at(i);
    phi[i] = phi[i - 1] + 0.5 * grid.width(0) * (prev + cur);
    prev = cur;
  }
  auto psi = cbar_transform(phi, c);

  TransportResult r{grid, monotone_coupling(a, b), ScalarField(grid, phi), ScalarField(grid, psi)};
  r.primal = coupling_cost(r.coupling, c);
  r.dual = dual_value(a, r.phi.values, b, r.psi.values);
  r.gap = r.primal - r.dual;
  r.solver = "exact1d";
  r.parameters["cost"] = cost.describe();

  if (mass_threshold < 0.0) mass_threshold = 1e-10 / grid.cell_volume();
  MapField map{grid, std::vector<Point>(n), std::vector<char>(n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    map.target[i] = {T[i], 0.0};
    map.mask[i] = rho[i] > mass_threshold;
  }
  return {std::move(r), std::move(map)};
}

/// W_p^p = int_0^1 |F^{-1}(s) - G^{-1}(s)|^p ds between the piecewise-constant
/// densities with cell masses a and b on a 1D grid. Both quantile functions
/// are affine on every piece of the merged cumulative-mass partition, so each
/// piece is integrated in closed form.
inline double quantile_transport_cost(const Grid& grid, std::span<const double> a, std::span<const double> b,
                                      double p) {
  if (grid.dim() != 1) throw Error(ErrorKind::dimension, "quantile transport cost is one-dimensional");
  if (a.size() != grid.size() || b.size() != grid.size()) throw Error(ErrorKind::shape, "masses do not match grid");
  double sa = 0.0, sb = 0.0;
  for (double v : a) sa += v;
  for (double v : b) sb += v;
  if (!(sa > 0.0) || !(sb > 0.0)) throw Error(ErrorKind::degenerate_input, "marginals carry no mass");
  const double lo = grid.lower(0), h = grid.width(0);
  const std::size_t n = a.size();
  // Quantile at s inside cell k whose cumulative mass starts at start_k.
  auto quantile = [&](std::size_t k, double start, double mass, double s) {
    return lo + (static_cast<double>(k) + (s - start) / mass) * h;
  };
  auto next_positive = [](std::span<const double> m, std::size_t k) {
    while (k < m.size() && !(m[k] > 0.0)) ++k;
    return k;
  };
  std::size_t i = next_positive(a, 0), j = next_positive(b, 0);
  double fa = 0.0, fb = 0.0, s = 0.0, total = 0.0;
  while (i < n && j < n) {
    const double ma = a[i] / sa, mb = b[j] / sb;
    const double end = std::min(fa + ma, fb + mb);
    if (end > s) {
      const double d0 = quantile(i, fa, ma, s) - quantile(j, fb, mb, s);
      const double d1 = quantile(i, fa, ma, end) - quantile(j, fb, mb, end);
      const double len = end - s;
      if (std::abs(d1 - d0) <= 1e-12 * std::max(std::abs(d0), std::abs(d1))) {
        total += std::pow(std::abs(0.5 * (d0 + d1)), p) * len;
      } else {
        // d/ds [sign(d) |d|^(p+1)] = (p+1) |d|^p d'(s), and d' = (d1 - d0) / len.
        auto prim = [&](double d) { return std::copysign(std::pow(std::abs(d), p + 1.0), d); };
        total += (prim(d1) - prim(d0)) / ((p + 1.0) * (d1 - d0)) * len;
      }
      s = end;
    }
    if (fa + ma <= end) {
      fa += ma;
      i = next_positive(a, i + 1);
    }
    if (fb + mb <= end) {
      fb += mb;
      j = next_positive(b, j + 1);
    }
  }
  return total;
}

}  // namespace otlab
