#pragma once

// Maps for the mollified costs h_eps against the map for h itself, along a
// decreasing sequence of eps.

#include <cmath>
#include <vector>

#include "otlab/cost.hpp"
#include "otlab/ot/map.hpp"
#include "otlab/ot/transport_lp.hpp"

namespace otlab {

struct MollificationRow {
  double epsilon = 0.0;
  /// sup over [0, R] of |p_{h_eps}' - p_h'|.
  double slope_deviation = 0.0;
  /// rho-measure of {|T_eps - T| > 2 dx}.
  double deviation_measure = 0.0;
  /// (sum rho |T_eps - T|^p vol)^(1/p).
  double lp_distance = 0.0;
  double primal = 0.0;
};

struct MollificationStudy {
  std::vector<MollificationRow> rows;
  double reference_primal = 0.0;
  double exponent = 2.0;
  bool slope_deviation_nonincreasing = true;
  bool measure_nonincreasing = true;
  bool distance_nonincreasing = true;
  /// Last L^p distance below 5 dx.
  bool final_below_threshold = true;
};

struct MollificationOptions {
  int quadrature_order = 16;
  /// Relative slack for the monotonicity flags.
  double slack = 0.1;
  /// Absolute floor under which changes count as noise.
  double noise = 1e-12;
  LpOptions lp;
};

inline bool nonincreasing(const std::vector<double>& v, double slack, double noise) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > (1.0 + slack) * v[k - 1] + noise) return false;
  return true;
}

inline MollificationStudy mollification_convergence_experiment(const DensityField& rho, const DensityField& g,
                                                               const RadialCost& base,
                                                               const std::vector<double>& epsilons,
                                                               const MollificationOptions& options = {}) {
  const Grid& grid = rho.grid();
  if (grid.dim() != 1) throw Error(ErrorKind::dimension, "the mollification study is one-dimensional");
  if (epsilons.empty()) throw Error(ErrorKind::parameter, "epsilon sequence is empty");
  for (std::size_t k = 1; k < epsilons.size(); ++k)
    if (!(epsilons[k] < epsilons[k - 1])) throw Error(ErrorKind::parameter, "epsilon sequence must be decreasing");

  MollificationStudy study;
  study.exponent = base.power_exponent().value_or(2.0);
  const auto ref = solve_lp(rho, g, base, options.lp);
  const auto ref_map = transport_map_from_potential(ref.phi, base, rho);
  study.reference_primal = ref.primal;
  const double dx = grid.width(0), vol = grid.cell_volume();

  std::vector<double> slopes, measures, distances;
  for (double eps : epsilons) {
    const auto cost = mollify(base, eps, options.quadrature_order, grid.dim());
    const auto r = solve_lp(rho, g, cost, options.lp);
    const auto map = transport_map_from_potential(r.phi, cost, rho);
    MollificationRow row;
    row.epsilon = eps;
    row.slope_deviation = sup_slope_deviation(base, cost);
    row.primal = r.primal;
    double integral = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!map.mask[i] || !ref_map.mask[i]) continue;
      const double d = norm(map.target[i] - ref_map.target[i]);
      if (d > 2.0 * dx) row.deviation_measure += rho[i] * vol;
      integral += rho[i] * vol * std::pow(d, study.exponent);
    }
    row.lp_distance = std::pow(integral, 1.0 / study.exponent);
    slopes.push_back(row.slope_deviation);
    measures.push_back(row.deviation_measure);
    distances.push_back(row.lp_distance);
    study.rows.push_back(row);
  }
  study.slope_deviation_nonincreasing = nonincreasing(slopes, 0.0, options.noise);
  study.measure_nonincreasing = nonincreasing(measures, options.slack, options.noise);
  study.distance_nonincreasing = nonincreasing(distances, options.slack, options.noise);
  study.final_below_threshold = distances.back() <= 5.0 * dx;
  return study;
}

}  // namespace otlab
