#pragma once

#include <cmath>
#include <map>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include "otlab/geometry.hpp"
#include "otlab/ot/cost_matrix.hpp"

namespace otlab {

struct CouplingEntry {
  std::size_t source;
  std::size_t target;
  double mass;
};

struct TransportResult {
  TransportResult(Grid g, std::vector<CouplingEntry> plan, ScalarField phi_, ScalarField psi_)
      : grid(std::move(g)), coupling(std::move(plan)), phi(std::move(phi_)), psi(std::move(psi_)) {}

  Grid grid;
  std::vector<CouplingEntry> coupling;
  ScalarField phi;
  ScalarField psi;
  double primal = 0.0;
  double dual = 0.0;
  /// primal - dual.
  double gap = 0.0;
  std::string solver;
  std::map<std::string, std::string> parameters;
  std::size_t iterations = 0;
};

/// Target point T(x) per cell, defined on masked cells only.
struct MapField {
  Grid grid;
  std::vector<Point> target;
  std::vector<char> mask;
  /// Largest distance by which a raw map value had to be clipped into the box.
  double max_clip_distance = 0.0;
};

inline double coupling_cost(std::span<const CouplingEntry> coupling, const CostMatrix& c) {
  double s = 0.0;
  for (const auto& e : coupling) s += e.mass * c(e.source, e.target);
  return s;
}

/// sum a_i phi_i + sum b_j psi_j, skipping zero-mass cells (their potentials
/// may be infinite).
inline double dual_value(std::span<const double> a, std::span<const double> phi, std::span<const double> b,
                         std::span<const double> psi) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > 0.0) s += a[i] * phi[i];
  for (std::size_t j = 0; j < b.size(); ++j)
    if (b[j] > 0.0) s += b[j] * psi[j];
  return s;
}

struct MarginalError {
  double rows = 0.0;  // max |row sum - a_i|
  double cols = 0.0;
};

inline MarginalError marginal_error(std::span<const CouplingEntry> coupling, std::span<const double> a,
                                    std::span<const double> b) {
  std::vector<double> r(a.size(), 0.0), c(b.size(), 0.0);
  for (const auto& e : coupling) {
    r[e.source] += e.mass;
    c[e.target] += e.mass;
  }
  MarginalError err;
  for (std::size_t i = 0; i < a.size(); ++i) err.rows = std::max(err.rows, std::abs(r[i] - a[i]));
  for (std::size_t j = 0; j < b.size(); ++j) err.cols = std::max(err.cols, std::abs(c[j] - b[j]));
  return err;
}

inline void require_same_mass(std::span<const double> a, std::span<const double> b, double tol = 1e-8) {
  double sa = 0.0, sb = 0.0;
  for (double v : a) sa += v;
  for (double v : b) sb += v;
  if (std::abs(sa - sb) > tol) throw Error(ErrorKind::input, "source and target masses differ");
  if (!(sa > 0.0)) throw Error(ErrorKind::degenerate_input, "marginals carry no mass");
}

}  // namespace otlab
