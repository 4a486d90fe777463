#pragma once

#include <limits>
#include <span>
#include <vector>

#include "otlab/ot/cost_matrix.hpp"
#include "otlab/parallel.hpp"

namespace otlab {

/// phi_i = min_j c_ij - psi_j (exact discrete minimum over the target cells).
inline std::vector<double> c_transform(std::span<const double> psi, const CostMatrix& c, int threads = 1) {
  if (psi.size() != c.cols()) throw Error(ErrorKind::shape, "c-transform input does not match the cost matrix");
  std::vector<double> phi(c.rows());
  parallel_for(c.rows(), threads, [&](std::size_t i) {
    const auto row = c.row(i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < row.size(); ++j) best = std::min(best, row[j] - psi[j]);
    phi[i] = best;
  });
  return phi;
}

/// psi_j = min_i c_ij - phi_i, the transform in the other variable.
inline std::vector<double> cbar_transform(std::span<const double> phi, const CostMatrix& c, int threads = 1) {
  if (phi.size() != c.rows()) throw Error(ErrorKind::shape, "c-bar-transform input does not match the cost matrix");
  std::vector<double> psi(c.cols());
  parallel_for(c.cols(), threads, [&](std::size_t j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c.rows(); ++i) best = std::min(best, c(i, j) - phi[i]);
    psi[j] = best;
  });
  return psi;
}

inline ScalarField c_transform(const ScalarField& psi, const RadialCost& cost, int threads = 1) {
  const auto c = CostMatrix::on_grid(psi.grid, cost);
  return ScalarField(psi.grid, c_transform(psi.values, c, threads));
}

struct PotentialPair {
  std::vector<double> phi;
  std::vector<double> psi;
};

/// phi <- (psi)^c, psi <- (phi)^cbar. The result is c-concave and dominates
/// the input pair pointwise whenever the input satisfied phi + psi <= c.
inline PotentialPair canonicalize(std::span<const double> psi, const CostMatrix& c, int threads = 1) {
  PotentialPair out;
  out.phi = c_transform(psi, c, threads);
  out.psi = cbar_transform(out.phi, c, threads);
  return out;
}

}  // namespace otlab
