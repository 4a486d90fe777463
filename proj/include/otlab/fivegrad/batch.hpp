#pragma once

// Batch driver: random smooth pairs x cost exponents x H exponents x
// resolutions, one report per (seed, p, q, n).

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "otlab/csv.hpp"
#include "otlab/fivegrad/inequality.hpp"
#include "otlab/ot/entropic.hpp"
#include "otlab/ot/exact_1d.hpp"
#include "otlab/ot/transport_lp.hpp"
#include "otlab/parallel.hpp"

namespace otlab {

struct InequalityReport {
  std::uint64_t seed = 0;
  double p = 0.0;
  double q = 0.0;
  int n = 0;
  int dim = 1;
  std::string solver;
  std::string cost;
  std::string H;
  double lhs = std::numeric_limits<double>::quiet_NaN();
  double flux = std::numeric_limits<double>::quiet_NaN();
  double tv_rho = 0.0;
  double tv_g = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  /// Empty unless the instance failed.
  std::string error;
  std::vector<double> integrand;
};

struct BatchSpec {
  std::vector<std::uint64_t> seeds{1};
  std::vector<double> p{2.0};
  std::vector<double> q{2.0};
  std::vector<int> n{128};
  int dim = 1;
  /// "lp", "entropic" or "exact1d".
  std::string solver = "lp";
  /// Use g = rho (the identity case).
  bool identical_pair = false;
  double kappa = 0.1;
  int modes = 4;
  double floor = 0.1;
  double entropic_epsilon = 1e-4;
  int threads = 1;
  bool keep_integrand = false;
};

/// tol(n) = kappa * (TV(rho) + TV(g)) / sqrt(n).
inline double inequality_tolerance(double kappa, double tv_rho, double tv_g, int n) {
  return kappa * (tv_rho + tv_g) / std::sqrt(static_cast<double>(n));
}

inline Grid batch_grid(int dim, int n) {
  return dim == 1 ? Grid::line(0.0, 1.0, n) : Grid::box({0.0, 0.0}, {1.0, 1.0}, {n, n});
}

/// Density pair of an instance: rho from 2*seed, g from 2*seed+1.
inline std::pair<DensityField, DensityField> batch_pair(const BatchSpec& spec, const Grid& grid, std::uint64_t seed) {
  auto rho = random_smooth_density(grid, 2 * seed, spec.modes, spec.floor);
  if (spec.identical_pair) return {rho, rho};
  return {rho, random_smooth_density(grid, 2 * seed + 1, spec.modes, spec.floor)};
}

inline void validate(const BatchSpec& spec) {
  if (spec.seeds.empty() || spec.p.empty() || spec.q.empty() || spec.n.empty())
    throw Error(ErrorKind::parameter, "batch lists must be non-empty");
  if (spec.dim != 1 && spec.dim != 2) throw Error(ErrorKind::parameter, "batch dim must be 1 or 2");
  if (spec.solver != "lp" && spec.solver != "entropic" && spec.solver != "exact1d")
    throw Error(ErrorKind::parameter, "batch solver must be lp, entropic or exact1d");
  if (spec.solver == "exact1d" && spec.dim != 1) throw Error(ErrorKind::parameter, "exact1d solver needs dim 1");
  for (double p : spec.p)
    if (!(p > 1.0)) throw Error(ErrorKind::parameter, "batch p must be > 1");
  for (double q : spec.q)
    if (!(q > 1.0)) throw Error(ErrorKind::parameter, "batch q must be > 1");
  for (int n : spec.n)
    if (n < 4) throw Error(ErrorKind::parameter, "batch n must be >= 4");
  if (!(spec.kappa >= 0.0)) throw Error(ErrorKind::parameter, "kappa must be >= 0");
  if (spec.modes < 1 || !(spec.floor > 0.0)) throw Error(ErrorKind::parameter, "modes >= 1 and floor > 0 required");
}

inline TransportResult solve_for_batch(const BatchSpec& spec, const DensityField& rho, const DensityField& g,
                                       const RadialCost& cost) {
  if (spec.solver == "lp") return solve_lp(rho, g, cost);
  if (spec.solver == "exact1d") return solve_exact_1d(rho, g, cost).result;
  EntropicOptions opt;
  opt.epsilon_final = spec.entropic_epsilon;
  return solve_entropic(rho, g, cost, opt);
}

/// Reports ordered by n, then p, then seed, then q. Solver failures are
/// recorded in the report instead of aborting the batch.
inline std::vector<InequalityReport> verify_batch(const BatchSpec& spec) {
  validate(spec);
  struct Job {
    int n;
    double p;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int n : spec.n)
    for (double p : spec.p)
      for (auto seed : spec.seeds) jobs.push_back({n, p, seed});
  const std::size_t nq = spec.q.size();
  std::vector<InequalityReport> out(jobs.size() * nq);
  parallel_for(jobs.size(), spec.threads, [&](std::size_t k) {
    const Job& job = jobs[k];
    const Grid grid = batch_grid(spec.dim, job.n);
    const auto cost = RadialCost::power(job.p, grid.diameter());
    const auto [rho, g] = batch_pair(spec, grid, job.seed);
    const double tv_r = tv_norm(rho), tv_g = tv_norm(g);
    for (std::size_t iq = 0; iq < nq; ++iq) {
      auto& r = out[k * nq + iq];
      r.seed = job.seed;
      r.p = job.p;
      r.q = spec.q[iq];
      r.n = job.n;
      r.dim = spec.dim;
      r.solver = spec.solver;
      r.cost = cost.describe();
      r.H = HFunction(spec.q[iq]).describe();
      r.tv_rho = tv_r;
      r.tv_g = tv_g;
      r.tolerance = inequality_tolerance(spec.kappa, tv_r, tv_g, job.n);
    }
    try {
      const auto result = solve_for_batch(spec, rho, g, cost);
      for (std::size_t iq = 0; iq < nq; ++iq) {
        auto& r = out[k * nq + iq];
        const HFunction H(spec.q[iq]);
        auto integrand = five_gradients_integrand(rho, g, result.phi, result.psi, H);
        double s = 0.0;
        for (double v : integrand) s += v;
        r.lhs = s * grid.cell_volume();
        r.flux = boundary_flux(rho, g, result.phi, result.psi, H);
        if (!std::isfinite(r.lhs) || !std::isfinite(r.flux))
          throw Error(ErrorKind::numerical, "non-finite inequality value");
        r.pass = r.lhs >= -r.tolerance;
        if (spec.keep_integrand) r.integrand = std::move(integrand);
      }
    } catch (const std::exception& e) {
      for (std::size_t iq = 0; iq < nq; ++iq) {
        auto& r = out[k * nq + iq];
        r.error = e.what();
        r.pass = false;
      }
    }
  });
  return out;
}

struct BatchSummary {
  std::size_t count = 0;
  std::size_t errors = 0;
  std::size_t passed = 0;
  std::size_t nonnegative = 0;
  double min_lhs = std::numeric_limits<double>::infinity();
  /// Smallest kappa under which every finished instance passes.
  double required_kappa = 0.0;
  bool all_pass() const { return count > 0 && passed == count; }
  double fraction_nonnegative() const { return count ? static_cast<double>(nonnegative) / count : 0.0; }
};

inline BatchSummary summarize(const std::vector<InequalityReport>& reports) {
  BatchSummary s;
  for (const auto& r : reports) {
    ++s.count;
    if (!r.error.empty()) {
      ++s.errors;
      continue;
    }
    if (r.pass) ++s.passed;
    if (r.lhs >= 0.0) ++s.nonnegative;
    s.min_lhs = std::min(s.min_lhs, r.lhs);
    const double scale = (r.tv_rho + r.tv_g) / std::sqrt(static_cast<double>(r.n));
    if (r.lhs < 0.0 && scale > 0.0) s.required_kappa = std::max(s.required_kappa, -r.lhs / scale);
  }
  return s;
}

inline void write_reports_csv(std::ostream& os, const std::vector<InequalityReport>& reports) {
  os << "seed,p,q,n,solver,lhs,flux,tv_rho,tv_g,tolerance,pass\n";
  for (const auto& r : reports) {
    os << r.seed << ',' << format_double(r.p) << ',' << format_double(r.q) << ',' << r.n << ',' << r.solver << ','
       << format_double(r.lhs) << ',' << format_double(r.flux) << ',' << format_double(r.tv_rho) << ','
       << format_double(r.tv_g) << ',' << format_double(r.tolerance) << ',' << (r.pass ? 1 : 0) << '\n';
  }
}

}  // namespace otlab
