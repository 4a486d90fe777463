#pragma once

// Log-domain entropic transport with epsilon-scaling. The last iterate is
// rounded onto the exact marginals so the returned coupling is feasible, and
// the potentials are re-canonicalized by an exact double c-transform.

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "otlab/ot/c_transform.hpp"
#include "otlab/ot/result.hpp"
#include "otlab/parallel.hpp"

namespace otlab {

struct EntropicOptions {
  double epsilon_final = 1e-4;
  /// Decreasing epsilons ending at epsilon_final. Empty: halve from the
  /// largest cost entry down to epsilon_final.
  std::vector<double> schedule;
  std::size_t max_iterations = 200'000;
  /// L1 violation of the source marginal at exit.
  double tolerance = 1e-7;
  /// Violation at which intermediate stages hand over to the next epsilon.
  double stage_tolerance = 1e-4;
  /// Over-relaxation weight in [1, 2) for both dual updates; 1 is plain
  /// alternating maximization.
  double relaxation = 1.8;
  int threads = 1;
};

inline std::vector<double> epsilon_schedule(const EntropicOptions& options, double max_cost) {
  if (!(options.epsilon_final > 0.0)) throw Error(ErrorKind::parameter, "epsilon must be positive");
  if (!options.schedule.empty()) {
    for (std::size_t k = 1; k < options.schedule.size(); ++k)
      if (!(options.schedule[k] < options.schedule[k - 1]))
        throw Error(ErrorKind::parameter, "epsilon schedule must be strictly decreasing");
    if (options.schedule.back() != options.epsilon_final)
      throw Error(ErrorKind::parameter, "epsilon schedule must end at epsilon_final");
    return options.schedule;
  }
  std::vector<double> s;
  for (double e = std::max(max_cost, options.epsilon_final); e > options.epsilon_final; e *= 0.5) s.push_back(e);
  s.push_back(options.epsilon_final);
  return s;
}

namespace detail {

// eps * log sum_k exp(term(k) / eps); -inf terms are skipped.
template <class Term>
double log_sum_exp(std::size_t count, double eps, Term&& term) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < count; ++k) top = std::max(top, term(k));
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (std::size_t k = 0; k < count; ++k) s += std::exp((term(k) - top) / eps);
  return top + eps * std::log(s);
}

// Rounds a positive matrix onto the transport polytope of (a, b): scale down
// overfull rows, then overfull columns, then distribute the deficits.
inline void round_to_marginals(std::vector<double>& pi, std::size_t m, std::size_t n, std::span<const double> a,
                               std::span<const double> b) {
  std::vector<double> r(m, 0.0), c(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) r[i] += pi[i * n + j];
  for (std::size_t i = 0; i < m; ++i) {
    const double x = r[i] > a[i] ? a[i] / r[i] : 1.0;
    for (std::size_t j = 0; j < n; ++j) pi[i * n + j] *= x;
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[j] += pi[i * n + j];
  for (std::size_t j = 0; j < n; ++j) {
    const double y = c[j] > b[j] ? b[j] / c[j] : 1.0;
    for (std::size_t i = 0; i < m; ++i) pi[i * n + j] *= y;
  }
  std::fill(r.begin(), r.end(), 0.0);
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      r[i] += pi[i * n + j];
      c[j] += pi[i * n + j];
    }
  double deficit = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    r[i] = std::max(a[i] - r[i], 0.0);
    deficit += r[i];
  }
  for (std::size_t j = 0; j < n; ++j) c[j] = std::max(b[j] - c[j], 0.0);
  if (deficit > 0.0)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) pi[i * n + j] += r[i] * c[j] / deficit;
}

}  // namespace detail

struct EntropicSolution {
  /// Dense row-major coupling.
  std::vector<double> coupling;
  /// Dual potentials with pi_ij = exp((f_i + g_j - c_ij) / eps).
  std::vector<double> f, g;
  /// L1 source-marginal violation before rounding.
  double residual = 0.0;
  std::size_t iterations = 0;
};

inline EntropicSolution solve_entropic_matrix(std::span<const double> a, std::span<const double> b,
                                              const CostMatrix& c, const EntropicOptions& options) {
  const std::size_t m = a.size(), n = b.size();
  if (m != c.rows() || n != c.cols()) throw Error(ErrorKind::shape, "marginals do not match the cost matrix");
  require_same_mass(a, b);
  const auto schedule = epsilon_schedule(options, c.max());
  const double ninf = -std::numeric_limits<double>::infinity();

  std::vector<double> f(m, 0.0), g(n, 0.0), la(m), lb(n);
  for (std::size_t i = 0; i < m; ++i) la[i] = a[i] > 0.0 ? std::log(a[i]) : ninf;
  for (std::size_t j = 0; j < n; ++j) lb[j] = b[j] > 0.0 ? std::log(b[j]) : ninf;
  for (std::size_t i = 0; i < m; ++i)
    if (a[i] == 0.0) f[i] = ninf;

  std::vector<double> transposed(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) transposed[j * m + i] = c(i, j);

  if (!(options.relaxation >= 1.0 && options.relaxation < 2.0))
    throw Error(ErrorKind::parameter, "relaxation must lie in [1, 2)");
  const double omega = options.relaxation;
  EntropicSolution out;
  std::vector<double> row_soft(m);
  double eps = schedule.front();
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    eps = schedule[stage];
    const bool last = stage + 1 == schedule.size();
    const double target = last ? options.tolerance : std::max(options.tolerance, options.stage_tolerance);
    while (true) {
      parallel_for(n, options.threads, [&](std::size_t j) {
        if (b[j] == 0.0) {
          g[j] = ninf;
          return;
        }
        const double* col = transposed.data() + j * m;
        const double next = eps * lb[j] - detail::log_sum_exp(m, eps, [&](std::size_t i) { return f[i] - col[i]; });
        g[j] = std::isfinite(g[j]) ? g[j] + omega * (next - g[j]) : next;
      });
      parallel_for(m, options.threads, [&](std::size_t i) {
        const auto row = c.row(i);
        row_soft[i] = detail::log_sum_exp(n, eps, [&](std::size_t j) { return g[j] - row[j]; });
      });
      double violation = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        if (a[i] > 0.0) violation += std::abs(a[i] - std::exp((f[i] + row_soft[i]) / eps));
      out.residual = violation;
      if (!std::isfinite(violation)) throw Error(ErrorKind::numerical, "entropic iteration produced non-finite values");
      if (violation <= target) break;
      if (out.iterations >= options.max_iterations)
        throw Error(ErrorKind::convergence, "entropic solver did not reach the marginal tolerance", violation);
      for (std::size_t i = 0; i < m; ++i)
        if (a[i] > 0.0) f[i] += omega * (eps * la[i] - row_soft[i] - f[i]);
      ++out.iterations;
    }
  }

  out.coupling.assign(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (a[i] == 0.0) continue;
    const auto row = c.row(i);
    for (std::size_t j = 0; j < n; ++j)
      if (b[j] > 0.0) out.coupling[i * n + j] = std::exp((f[i] + g[j] - row[j]) / eps);
  }
  detail::round_to_marginals(out.coupling, m, n, a, b);
  out.f = std::move(f);
  out.g = std::move(g);
  return out;
}

inline TransportResult solve_entropic(const DensityField& rho, const DensityField& g, const RadialCost& cost,
                                      const EntropicOptions& options) {
  require_same_grid(rho.grid(), g.grid());
  const Grid& grid = rho.grid();
  const auto a = rho.cell_masses(), b = g.cell_masses();
  const auto c = CostMatrix::on_grid(grid, cost);
  auto sol = solve_entropic_matrix(a, b, c, options);

  const std::size_t n = grid.size();
  std::vector<CouplingEntry> coupling;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (sol.coupling[i * n + j] > 0.0) coupling.push_back({i, j, sol.coupling[i * n + j]});
  auto pot = canonicalize(sol.g, c, options.threads);

  TransportResult r{grid, std::move(coupling), ScalarField(grid, std::move(pot.phi)), ScalarField(grid, std::move(pot.psi))};
  r.primal = coupling_cost(r.coupling, c);
  r.dual = dual_value(a, r.phi.values, b, r.psi.values);
  r.gap = r.primal - r.dual;
  r.solver = "entropic";
  r.parameters["cost"] = cost.describe();
  r.parameters["epsilon"] = [&] {
    std::ostringstream s;
    s << options.epsilon_final;
    return s.str();
  }();
  r.parameters["residual"] = [&] {
    std::ostringstream s;
    s << sol.residual;
    return s.str();
  }();
  r.iterations = sol.iterations;
  return r;
}

}  // namespace otlab
