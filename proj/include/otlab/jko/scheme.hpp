#pragma once

// Minimizing-movement step
//   rho_{k+1} = argmin_rho  W_p^p(rho, rho_k) / (p tau^(p-1)) + sum f(rho) vol
// by entropic proximal iteration on the coupling. With cost c = |x-y|^p / p
// and sigma = tau^(p-1), the step minimizes
//   <c, pi> + eps KL(pi) + sigma sum f(b_j / vol) vol
// over couplings pi with first marginal a = rho_k vol and second marginal b.
// Each inner iteration fixes the first marginal (u-update) and then takes the
// KL-proximal step of the energy on the second marginal (v-update).
// In 1D the entropic result is then polished by damped Newton-type steps on
// the unregularized objective, whose first variation is available in closed
// form from the quantile map. This removes the entropic blur, which otherwise grows
// like eps / tau as the step shrinks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "otlab/cost.hpp"
#include "otlab/jko/energy.hpp"
#include "otlab/ot/entropic.hpp"
#include "otlab/ot/exact_1d.hpp"
#include "otlab/ot/transport_lp.hpp"
#include "otlab/parallel.hpp"

namespace otlab {

struct JkoConfig {
  double p = 2.0;
  double tau = 1e-3;
  int steps = 1;
  Energy energy = Energy::entropy();
  /// Entropic weight; <= 0 selects p_h(dx) = dx^p / p.
  double epsilon = -1.0;
  std::size_t max_inner_iterations = 20'000;
  /// L1 change of successive iterates at which the inner loop stops.
  double inner_tolerance = 1e-8;
  /// Largest admitted increase of the step objective over rho_k.
  double descent_tolerance = 1e-10;
  int max_backtracks = 30;
  /// Damped Newton-type steps on the unregularized objective after the
  /// entropic solve (1D only; 0 disables).
  int polish_iterations = 20;
  int threads = 1;
};

inline void validate(const JkoConfig& c) {
  if (!(c.p > 1.0) || !std::isfinite(c.p)) throw Error(ErrorKind::parameter, "jko p must be > 1");
  if (!(c.tau > 0.0)) throw Error(ErrorKind::parameter, "jko tau must be positive");
  if (c.steps < 0) throw Error(ErrorKind::parameter, "jko step count must be >= 0");
  if (c.max_inner_iterations < 1) throw Error(ErrorKind::parameter, "jko inner iterations must be >= 1");
  if (!(c.inner_tolerance > 0.0)) throw Error(ErrorKind::parameter, "jko inner tolerance must be positive");
  if (c.polish_iterations < 0) throw Error(ErrorKind::parameter, "jko polish iterations must be >= 0");
}

inline double jko_epsilon(const JkoConfig& c, const Grid& grid) {
  return c.epsilon > 0.0 ? c.epsilon : std::pow(grid.max_width(), c.p) / c.p;
}

/// W_p^p between two densities on the same grid: exact quantile formula in 1D,
/// LP between cell masses in 2D.
inline double wasserstein_pp(const DensityField& a, const DensityField& b, double p) {
  require_same_grid(a.grid(), b.grid());
  const Grid& grid = a.grid();
  if (grid.dim() == 1) return quantile_transport_cost(grid, a.cell_masses(), b.cell_masses(), p);
  // The LP cost is |z|^p / p.
  return p * solve_lp(a, b, RadialCost::power(p, grid.diameter())).primal;
}

/// The step objective F(rho) = W_p^p(rho, rho_k) / (p tau^(p-1)) + energy(rho).
struct StepObjective {
  double transport = 0.0;
  double energy = 0.0;
  double total() const { return transport + energy; }
};

inline StepObjective step_objective(const DensityField& rho, const DensityField& rho_k, const JkoConfig& c) {
  StepObjective o;
  o.transport = wasserstein_pp(rho, rho_k, c.p) / (c.p * std::pow(c.tau, c.p - 1.0));
  o.energy = c.energy.integral(rho);
  return o;
}

struct JkoStep {
  DensityField density;
  StepObjective objective;
  /// Last L1 change of the inner iteration.
  double residual = 0.0;
  std::size_t inner_iterations = 0;
  /// Weight of the entropic candidate in the returned density (1 unless the
  /// descent check had to pull the step back toward rho_k).
  double step_fraction = 1.0;
  /// Accepted polish iterations.
  int polish_iterations = 0;
};

namespace detail {

// Solves sigma * f'(b / vol) + eps (log b - log q) = 0 for log b.
inline double energy_prox_log(const Energy& e, double sigma, double eps, double log_q, double log_vol) {
  if (e.kind() == Energy::Kind::entropy) return (eps * log_q + sigma * (log_vol - 1.0)) / (sigma + eps);
  const double m = e.exponent();
  const double k = sigma * m / (m - 1.0);
  // F(t) = k exp((m-1)(t - log_vol)) + eps (t - log_q) is convex increasing;
  // Newton from a point with F >= 0 decreases monotonically to the root.
  double t = log_q;
  for (int it = 0; it < 200; ++it) {
    const double ex = k * std::exp((m - 1.0) * (t - log_vol));
    const double F = ex + eps * (t - log_q);
    const double dF = (m - 1.0) * ex + eps;
    const double next = t - F / dF;
    if (std::abs(next - t) <= 1e-14 * (1.0 + std::abs(t))) return next;
    t = next;
  }
  return t;
}

// Gradient of F at rho (per unit cell volume), centered under rho so that
// exp-steps along it keep the mass.
inline std::vector<double> objective_gradient_1d(const DensityField& rho, const DensityField& rho_k,
                                                 const JkoConfig& c) {
  const Grid& grid = rho.grid();
  const std::size_t n = grid.size();
  const double dx = grid.width(0), sigma = std::pow(c.tau, c.p - 1.0);
  const auto T = quantile_map(grid, rho.cell_masses(), rho_k.cell_masses());
  // Kantorovich potential of |x-y|^p / p: phi' = h'(x - T(x)).
  auto slope = [&](std::size_t i) {
    const double d = grid.center(i)[0] - T[i];
    return d == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(d), c.p - 1.0), d);
  };
  std::vector<double> grad(n);
  double phi = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) phi += 0.5 * dx * (slope(i - 1) + slope(i));
    grad[i] = phi / sigma + c.energy.f_prime(rho[i]);
    mean += grad[i] * rho[i] * dx;
  }
  for (double& g : grad) g -= mean;
  return grad;
}

// Solves (I / sigma + L D) d = -L grad, with L u = -(rho u_x)_x under zero
// flux and D = diag f''(rho). This is a Newton step with the transport
// Hessian replaced by its linearization at T = id.
inline std::vector<double> polish_direction(const DensityField& rho, const std::vector<double>& grad,
                                            const JkoConfig& c) {
  const std::size_t n = rho.size();
  const double dx = rho.grid().width(0), sigma = std::pow(c.tau, c.p - 1.0), k = 1.0 / (dx * dx);
  std::vector<double> face(n + 1, 0.0), D(n), lo(n, 0.0), di(n), up(n, 0.0), rhs(n);
  for (std::size_t i = 1; i < n; ++i) face[i] = 0.5 * (rho[i - 1] + rho[i]);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = 1e-7 * std::max(rho[i], 1e-12);
    D[i] = (c.energy.f_prime(rho[i] + h) - c.energy.f_prime(rho[i] - h)) / (2.0 * h);
  }
  for (std::size_t i = 0; i < n; ++i) {
    di[i] = 1.0 / sigma + (face[i] + face[i + 1]) * D[i] * k;
    double lg = (face[i] + face[i + 1]) * grad[i];
    if (i > 0) {
      lo[i] = -face[i] * D[i - 1] * k;
      lg -= face[i] * grad[i - 1];
    }
    if (i + 1 < n) {
      up[i] = -face[i + 1] * D[i + 1] * k;
      lg -= face[i + 1] * grad[i + 1];
    }
    rhs[i] = -lg * k;
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double m = lo[i] / di[i - 1];
    di[i] -= m * up[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  std::vector<double> d(n);
  d[n - 1] = rhs[n - 1] / di[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) d[i] = (rhs[i] - up[i] * d[i + 1]) / di[i];
  return d;
}

// Damped steps along polish_direction; only decreasing moves are accepted.
inline int polish_1d(DensityField& rho, StepObjective& obj, const DensityField& rho_k, const JkoConfig& c) {
  const std::size_t n = rho.size();
  int accepted = 0;
  for (int it = 0; it < c.polish_iterations; ++it) {
    const auto d = polish_direction(rho, objective_gradient_1d(rho, rho_k, c), c);
    bool moved = false;
    for (double t = 1.0; t > 1e-10; t *= 0.5) {
      std::vector<double> v(n);
      bool positive = true;
      for (std::size_t i = 0; i < n && positive; ++i) positive = (v[i] = rho[i] + t * d[i]) > 0.0;
      if (!positive) continue;
      auto cand = normalize(DensityField(rho.grid(), std::move(v)));
      const auto o = step_objective(cand, rho_k, c);
      if (o.total() < obj.total()) {
        rho = std::move(cand);
        obj = o;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    ++accepted;
  }
  return accepted;
}

}  // namespace detail

/// One step from rho_k. `warm` carries the second dual potential between
/// steps (resized as needed).
inline JkoStep jko_step(const DensityField& rho_k, const JkoConfig& config, std::vector<double>* warm = nullptr) {
  validate(config);
  const Grid& grid = rho_k.grid();
  const std::size_t n = grid.size();
  const double eps = jko_epsilon(config, grid);
  const double sigma = std::pow(config.tau, config.p - 1.0);
  const double vol = grid.cell_volume(), log_vol = std::log(vol);
  const auto c = CostMatrix::on_grid(grid, RadialCost::power(config.p, grid.diameter()));
  const auto a = rho_k.cell_masses();
  const double ninf = -std::numeric_limits<double>::infinity();

  std::vector<double> la(n), u(n, 0.0), v(n, 0.0), lq(n), marginal(n), prev(n);
  for (std::size_t i = 0; i < n; ++i) la[i] = a[i] > 0.0 ? std::log(a[i]) : ninf;
  if (warm && warm->size() == n) v = *warm;
  for (std::size_t i = 0; i < n; ++i) prev[i] = rho_k[i];

  JkoStep out{rho_k, {}, 0.0, 0, 1.0};
  bool converged = false;
  for (std::size_t it = 0; it < config.max_inner_iterations; ++it) {
    parallel_for(n, config.threads, [&](std::size_t i) {
      if (a[i] == 0.0) {
        u[i] = ninf;
        return;
      }
      const auto row = c.row(i);
      u[i] = eps * la[i] - detail::log_sum_exp(n, eps, [&](std::size_t j) { return v[j] - row[j]; });
    });
    // Column sums of the current coupling: b_j = exp(v_j / eps) q_j.
    parallel_for(n, config.threads, [&](std::size_t j) {
      const auto col = c.row(j);  // the grid cost matrix is symmetric
      lq[j] = detail::log_sum_exp(n, eps, [&](std::size_t i) { return u[i] - col[i]; }) / eps;
      marginal[j] = std::exp(v[j] / eps + lq[j]) / vol;
    });
    double change = 0.0;
    for (std::size_t j = 0; j < n; ++j) change += std::abs(marginal[j] - prev[j]);
    change *= vol;
    out.residual = change;
    out.inner_iterations = it + 1;
    if (!std::isfinite(change)) throw Error(ErrorKind::numerical, "jko inner iteration produced non-finite values");
    if (it > 0 && change <= config.inner_tolerance) {
      converged = true;
      break;
    }
    prev = marginal;
    for (std::size_t j = 0; j < n; ++j) {
      const double lb = detail::energy_prox_log(config.energy, sigma, eps, lq[j], log_vol);
      v[j] = eps * (lb - lq[j]);
    }
  }
  if (!converged) throw Error(ErrorKind::step, "jko inner iteration did not converge", out.residual);
  for (double x : marginal)
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorKind::projection, "jko update produced a negative density");
  if (warm) *warm = v;

  auto candidate = normalize(DensityField(grid, marginal));
  const double start = config.energy.integral(rho_k);
  auto obj = step_objective(candidate, rho_k, config);
  double t = 1.0;
  for (int k = 0; obj.total() > start + config.descent_tolerance; ++k) {
    if (k == config.max_backtracks) {
      candidate = rho_k;
      obj = {0.0, start};
      t = 0.0;
      break;
    }
    t *= 0.5;
    std::vector<double> mix(n);
    for (std::size_t i = 0; i < n; ++i) mix[i] = (1.0 - t) * rho_k[i] + t * marginal[i];
    candidate = normalize(DensityField(grid, mix));
    obj = step_objective(candidate, rho_k, config);
  }
  if (grid.dim() == 1 && config.polish_iterations > 0)
    out.polish_iterations = detail::polish_1d(candidate, obj, rho_k, config);
  out.density = std::move(candidate);
  out.objective = obj;
  out.step_fraction = t;
  return out;
}

struct TrajectoryEntry {
  int step = 0;
  double time = 0.0;
  double tv = 0.0;
  double energy = 0.0;
  /// Transport term W_p^p(rho_k, rho_{k-1}) / (p tau^(p-1)) of the step that produced the entry.
  double cost = 0.0;
  double residual = 0.0;
};

struct Trajectory {
  std::vector<DensityField> densities;
  std::vector<TrajectoryEntry> entries;
  /// Objective of each step against its start, F(rho_{k+1}) - F(rho_k) with F(rho_k) = energy(rho_k).
  std::vector<double> descent;
  /// Set when a step failed; the trajectory then holds the iterates before it.
  std::optional<std::string> error;
  std::optional<ErrorKind> error_kind;
};

inline Trajectory run_jko(const DensityField& rho0, const JkoConfig& config) {
  validate(config);
  Trajectory tr;
  tr.densities.push_back(rho0);
  tr.entries.push_back({0, 0.0, tv_norm(rho0), config.energy.integral(rho0), 0.0, 0.0});
  std::vector<double> warm;
  for (int k = 0; k < config.steps; ++k) {
    try {
      auto step = jko_step(tr.densities.back(), config, &warm);
      tr.descent.push_back(step.objective.total() - tr.entries.back().energy);
      tr.entries.push_back({k + 1, (k + 1) * config.tau, tv_norm(step.density), step.objective.energy,
                            step.objective.transport, step.residual});
      tr.densities.push_back(std::move(step.density));
    } catch (const Error& e) {
      tr.error = e.what();
      tr.error_kind = e.kind();
      break;
    }
  }
  return tr;
}

}  // namespace otlab
