#pragma once

// Explicit finite volumes for  u_t = (|w_x|^(q-2) w_x)_x,  w = g(u),
// q = p / (p - 1), on a 1D grid with zero flux through both ends. Face fluxes
// telescope, so mass is conserved to rounding.

#include <algorithm>
#include <cmath>
#include <vector>

#include "otlab/jko/energy.hpp"
#include "otlab/jko/scheme.hpp"

namespace otlab {

struct PdeOptions {
  /// Regularization of |w_x|^(q-2) for q < 2: (w_x^2 + delta^2)^((q-2)/2).
  double delta = 1e-6;
  /// Safety factor of the stability bound.
  double safety = 0.2;
  /// Keep every k-th state (the last one is always kept).
  int record_every = 1;
};

namespace detail {

inline double flux_factor(double dw, double q, double delta) {
  if (q == 2.0) return 1.0;
  return std::pow(dw * dw + (q < 2.0 ? delta * delta : 0.0), 0.5 * (q - 2.0));
}

// Slope of the face flux with respect to w_x.
inline double flux_slope(double dw, double q, double delta) {
  if (q == 2.0) return 1.0;
  return (q - 1.0) * std::pow(dw * dw + (q < 2.0 ? delta * delta : 0.0), 0.5 * (q - 2.0));
}

}  // namespace detail

/// Largest dt admitted by safety * dx^2 / (max g'(u) * max flux slope) for the
/// state u.
inline double pde_stable_dt(const Grid& grid, std::span<const double> u, double p, const Energy& energy,
                            const PdeOptions& options = {}) {
  const double q = p / (p - 1.0), dx = grid.width(0);
  const std::size_t n = u.size();
  double gmax = 0.0, smax = 0.0;
  for (double v : u) gmax = std::max(gmax, energy.g_prime(std::max(v, 0.0), p));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dw = (energy.g(u[i + 1], p) - energy.g(u[i], p)) / dx;
    smax = std::max(smax, detail::flux_slope(dw, q, options.delta));
  }
  if (q < 2.0) smax = std::max(smax, detail::flux_slope(0.0, q, options.delta));
  const double rate = gmax * smax;
  return rate > 0.0 ? options.safety * dx * dx / rate : std::numeric_limits<double>::infinity();
}

/// Integrates `steps` explicit steps of size dt. The stability bound is
/// checked at every step; a violation is a parameter error.
inline Trajectory reference_pde_solve(const DensityField& rho0, double p, const Energy& energy, double dt, int steps,
                                      const PdeOptions& options = {}) {
  const Grid& grid = rho0.grid();
  if (grid.dim() != 1) throw Error(ErrorKind::dimension, "the reference PDE solver is one-dimensional");
  if (!(p > 1.0)) throw Error(ErrorKind::parameter, "p must be > 1");
  if (!(dt > 0.0) || steps < 0) throw Error(ErrorKind::parameter, "dt must be positive and steps >= 0");
  if (options.record_every < 1) throw Error(ErrorKind::parameter, "record_every must be >= 1");
  const double q = p / (p - 1.0), dx = grid.width(0);
  const std::size_t n = grid.size();
  std::vector<double> u(rho0.values().begin(), rho0.values().end()), w(n), flux(n + 1, 0.0);

  Trajectory tr;
  auto record = [&](int k) {
    DensityField d(grid, u);
    tr.entries.push_back({k, k * dt, tv_norm(d), energy.integral(d), 0.0, 0.0});
    tr.densities.push_back(std::move(d));
  };
  record(0);
  for (int k = 0; k < steps; ++k) {
    if (dt > pde_stable_dt(grid, u, p, energy, options) * (1.0 + 1e-12))
      throw Error(ErrorKind::parameter, "dt violates the explicit stability bound");
    for (std::size_t i = 0; i < n; ++i) w[i] = energy.g(u[i], p);
    for (std::size_t i = 1; i < n; ++i) {
      const double dw = (w[i] - w[i - 1]) / dx;
      flux[i] = detail::flux_factor(dw, q, options.delta) * dw;
    }
    for (std::size_t i = 0; i < n; ++i) u[i] += dt / dx * (flux[i + 1] - flux[i]);
    for (double v : u)
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::numerical, "reference PDE produced a negative state");
    if ((k + 1) % options.record_every == 0 || k + 1 == steps) record(k + 1);
  }
  return tr;
}

}  // namespace otlab
