#pragma once

#include <cmath>
#include <vector>

#include "otlab/jko/pde.hpp"
#include "otlab/jko/scheme.hpp"

namespace otlab {

struct Checkpoint {
  double time = 0.0;
  int jko_step = 0;
  double l1_distance = 0.0;
};

struct JkoPdeReport {
  std::vector<Checkpoint> checkpoints;
  /// Final-checkpoint distance of the run with tau / 2 (NaN when not run).
  double halved_tau_distance = std::numeric_limits<double>::quiet_NaN();
  /// halved_tau_distance <= final distance.
  bool refinement_nonincreasing = true;
  Trajectory jko;
};

inline double l1_distance(const DensityField& a, const DensityField& b) {
  require_same_grid(a.grid(), b.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s * a.grid().cell_volume();
}

namespace detail {

// Checkpoint j of 5 sits at step round(j K / 4).
inline std::vector<int> checkpoint_steps(int steps) {
  std::vector<int> out;
  for (int j = 0; j <= 4; ++j) out.push_back(static_cast<int>(std::lround(j * steps / 4.0)));
  return out;
}

// L1 distances at the checkpoints between a JKO run and the PDE integrated
// with a step near `dt` that lands exactly on every checkpoint time.
inline std::vector<Checkpoint> compare_runs(const DensityField& rho0, const JkoConfig& config, double dt,
                                            const PdeOptions& pde_options, Trajectory& jko) {
  jko = run_jko(rho0, config);
  if (jko.error) throw Error(*jko.error_kind, "jko run failed: " + *jko.error);
  std::vector<Checkpoint> out;
  const auto steps = checkpoint_steps(config.steps);
  DensityField state = rho0;
  int done = 0;
  for (int k : steps) {
    const double span = (k - done) * config.tau;
    if (span > 0.0) {
      const int sub = static_cast<int>(std::ceil(span / dt - 1e-9));
      PdeOptions o = pde_options;
      o.record_every = sub;
      state = reference_pde_solve(state, config.p, config.energy, span / sub, sub, o).densities.back();
      done = k;
    }
    out.push_back({k * config.tau, k, l1_distance(jko.densities[k], state)});
  }
  return out;
}

}  // namespace detail

/// JKO trajectory against the reference PDE at 5 checkpoints over the horizon
/// steps * tau; optionally repeats the JKO run with tau / 2.
inline JkoPdeReport jko_vs_pde_report(const DensityField& rho0, const JkoConfig& config, double dt,
                                      bool with_refinement = true, const PdeOptions& pde_options = {}) {
  if (rho0.grid().dim() != 1) throw Error(ErrorKind::dimension, "the JKO/PDE comparison is one-dimensional");
  if (!(dt > 0.0)) throw Error(ErrorKind::parameter, "dt must be positive");
  JkoPdeReport rep;
  rep.checkpoints = detail::compare_runs(rho0, config, dt, pde_options, rep.jko);
  if (with_refinement && config.steps > 0) {
    JkoConfig half = config;
    half.tau = 0.5 * config.tau;
    half.steps = 2 * config.steps;
    Trajectory discard;
    const auto fine = detail::compare_runs(rho0, half, dt, pde_options, discard);
    rep.halved_tau_distance = fine.back().l1_distance;
    rep.refinement_nonincreasing = rep.halved_tau_distance <= rep.checkpoints.back().l1_distance;
  }
  return rep;
}

}  // namespace otlab
