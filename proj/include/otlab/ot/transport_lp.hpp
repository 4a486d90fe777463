#pragma once

// Exact discrete transport by primal simplex on the transportation polytope.
// The basis is a spanning tree of the bipartite graph rows + columns with
// m + n - 1 basic cells; pivots follow Bland's rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "otlab/ot/c_transform.hpp"
#include "otlab/ot/result.hpp"

namespace otlab {

struct LpOptions {
  /// Largest admissible rows * cols.
  std::size_t max_entries = std::size_t{1} << 24;
  std::size_t max_pivots = 50'000'000;
  int threads = 1;
};

struct LpSolution {
  std::vector<CouplingEntry> plan;
  /// Duals with u_i + v_j = c_ij on the support of the plan.
  std::vector<double> u, v;
  double primal = 0.0;
  std::size_t pivots = 0;
};

namespace detail {

class TransportSimplex {
 public:
  TransportSimplex(std::span<const double> a, std::span<const double> b, const CostMatrix& c)
      : m_(a.size()), n_(b.size()), cost_(c), adjacency_(m_ + n_) {
    scale_ = std::max(1.0, c.max());
    north_west_corner(a, b);
  }

  void run(std::size_t max_pivots) {
    const double tol = 1e-13 * scale_;
    while (true) {
      compute_potentials();
      const auto entering = find_entering(tol);
      if (!entering) return;
      if (pivots_ == max_pivots)
        throw Error(ErrorKind::convergence, "transport simplex hit its pivot limit", entering->second);
      pivot(entering->first);
      ++pivots_;
    }
  }

  LpSolution solution() {
    compute_potentials();
    LpSolution s;
    s.u.assign(u_.begin(), u_.end());
    s.v.assign(v_.begin(), v_.end());
    for (const auto& arc : arcs_) {
      if (arc.flow > 0.0) s.plan.push_back({arc.row, arc.col, arc.flow});
    }
    std::sort(s.plan.begin(), s.plan.end(),
              [](const auto& x, const auto& y) { return std::tie(x.source, x.target) < std::tie(y.source, y.target); });
    s.primal = coupling_cost(s.plan, cost_);
    s.pivots = pivots_;
    return s;
  }

 private:
  struct Arc {
    std::size_t row, col;
    double flow;
  };
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  std::size_t col_node(std::size_t j) const { return m_ + j; }
  std::size_t other_end(const Arc& arc, std::size_t node) const {
    return node == arc.row ? col_node(arc.col) : arc.row;
  }

  void add_arc(std::size_t i, std::size_t j, double flow) {
    const std::size_t id = arcs_.size();
    arcs_.push_back({i, j, flow});
    adjacency_[i].push_back(id);
    adjacency_[col_node(j)].push_back(id);
  }

  // Replace arc `id` by a new arc in place; adjacency lists are patched.
  void replace_arc(std::size_t id, std::size_t i, std::size_t j, double flow) {
    auto drop = [&](std::size_t node) {
      auto& adj = adjacency_[node];
      adj.erase(std::find(adj.begin(), adj.end(), id));
    };
    drop(arcs_[id].row);
    drop(col_node(arcs_[id].col));
    arcs_[id] = {i, j, flow};
    adjacency_[i].push_back(id);
    adjacency_[col_node(j)].push_back(id);
  }

  void north_west_corner(std::span<const double> a, std::span<const double> b) {
    std::vector<double> ra(a.begin(), a.end()), rb(b.begin(), b.end());
    double sa = 0.0, sb = 0.0;
    for (double x : ra) sa += x;
    for (double x : rb) sb += x;
    for (double& x : rb) x *= sa / sb;
    std::size_t i = 0, j = 0;
    while (true) {
      const double x = std::min(ra[i], rb[j]);
      add_arc(i, j, std::max(x, 0.0));
      ra[i] -= x;
      rb[j] -= x;
      if (i + 1 == m_ && j + 1 == n_) break;
      if (i + 1 == m_)
        ++j;
      else if (j + 1 == n_ || ra[i] <= rb[j])
        ++i;
      else
        ++j;
    }
  }

  // Tree potentials rooted at row 0, with parent arcs and depths for cycle search.
  void compute_potentials() {
    const std::size_t nodes = m_ + n_;
    potential_.assign(nodes, 0.0);
    parent_arc_.assign(nodes, npos);
    depth_.assign(nodes, npos);
    std::deque<std::size_t> queue{0};
    depth_[0] = 0;
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (std::size_t id : adjacency_[node]) {
        const Arc& arc = arcs_[id];
        const std::size_t next = other_end(arc, node);
        if (depth_[next] != npos) continue;
        depth_[next] = depth_[node] + 1;
        parent_arc_[next] = id;
        // u_i + v_j = c_ij on basic cells.
        potential_[next] = cost_(arc.row, arc.col) - potential_[node];
        queue.push_back(next);
      }
    }
    u_ = std::span<const double>(potential_.data(), m_);
    v_ = std::span<const double>(potential_.data() + m_, n_);
  }

  // Bland: the first (row, col) in index order with negative reduced cost.
  std::optional<std::pair<std::pair<std::size_t, std::size_t>, double>> find_entering(double tol) const {
    for (std::size_t i = 0; i < m_; ++i) {
      const auto row = cost_.row(i);
      const double ui = u_[i];
      for (std::size_t j = 0; j < n_; ++j) {
        const double rc = row[j] - ui - v_[j];
        if (rc < -tol) return std::make_pair(std::make_pair(i, j), rc);
      }
    }
    return std::nullopt;
  }

  void pivot(std::pair<std::size_t, std::size_t> entering) {
    const auto [ei, ej] = entering;
    // Tree path from column node ej to row node ei.
    std::vector<std::size_t> from_col, from_row;
    std::size_t x = col_node(ej), y = ei;
    while (depth_[x] > depth_[y]) {
      from_col.push_back(parent_arc_[x]);
      x = other_end(arcs_[parent_arc_[x]], x);
    }
    while (depth_[y] > depth_[x]) {
      from_row.push_back(parent_arc_[y]);
      y = other_end(arcs_[parent_arc_[y]], y);
    }
    while (x != y) {
      from_col.push_back(parent_arc_[x]);
      x = other_end(arcs_[parent_arc_[x]], x);
      from_row.push_back(parent_arc_[y]);
      y = other_end(arcs_[parent_arc_[y]], y);
    }
    std::vector<std::size_t> path = from_col;
    path.insert(path.end(), from_row.rbegin(), from_row.rend());
    // Entering cell gains theta; signs alternate -,+,-,... along the path.
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < path.size(); k += 2) theta = std::min(theta, arcs_[path[k]].flow);
    std::size_t leaving = npos;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Arc& arc = arcs_[path[k]];
      if (arc.flow > theta) continue;
      if (leaving == npos ||
          std::tie(arc.row, arc.col) < std::tie(arcs_[leaving].row, arcs_[leaving].col))
        leaving = path[k];
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      Arc& arc = arcs_[path[k]];
      arc.flow = k % 2 == 0 ? std::max(arc.flow - theta, 0.0) : arc.flow + theta;
    }
    replace_arc(leaving, ei, ej, theta);
  }

  std::size_t m_, n_;
  const CostMatrix& cost_;
  double scale_ = 1.0;
  std::vector<Arc> arcs_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<double> potential_;
  std::vector<std::size_t> parent_arc_, depth_;
  std::span<const double> u_, v_;
  std::size_t pivots_ = 0;
};


// When the support of the plan splits into several connected pieces, the
// duals may be shifted by a constant per piece (+d on its rows, -d on its
// columns) as long as u_i + v_j <= c_ij. Each shift is pinned halfway between
// its largest and smallest admissible value relative to the piece of row 0,
// which gives constant potentials for the identity plan. Rows and columns that
// carry no mass are left alone.
inline void center_duals(std::span<const CouplingEntry> plan, std::vector<double>& u, std::vector<double>& v,
                         const CostMatrix& c) {
  const std::size_t m = u.size(), n = v.size();
  std::vector<std::size_t> parent(m + n);
  for (std::size_t k = 0; k < parent.size(); ++k) parent[k] = k;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<char> used(m + n, 0);
  for (const auto& e : plan) {
    used[e.source] = used[m + e.target] = 1;
    const std::size_t a = find(e.source), b = find(m + e.target);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> piece(m + n, none);
  std::size_t pieces = 0;
  std::vector<std::size_t> label(m + n, none);
  for (std::size_t k = 0; k < m + n; ++k) {
    if (!used[k]) continue;
    const std::size_t r = find(k);
    if (label[r] == none) label[r] = pieces++;
    piece[k] = label[r];
  }
  if (pieces <= 1) return;

  // w[a * pieces + b]: d_b - d_a <= w, from rows of b against columns of a.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> w(pieces * pieces, inf);
  for (std::size_t i = 0; i < m; ++i) {
    if (piece[i] == none) continue;
    const auto row = c.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (piece[m + j] == none) continue;
      double& slot = w[piece[m + j] * pieces + piece[i]];
      slot = std::min(slot, std::max(row[j] - u[i] - v[j], 0.0));
    }
  }
  auto shortest = [&](bool reverse) {
    std::vector<double> dist(pieces, inf);
    std::vector<char> done(pieces, 0);
    dist[0] = 0.0;
    for (std::size_t step = 0; step < pieces; ++step) {
      std::size_t best = none;
      for (std::size_t k = 0; k < pieces; ++k)
        if (!done[k] && (best == none || dist[k] < dist[best])) best = k;
      done[best] = 1;
      for (std::size_t k = 0; k < pieces; ++k) {
        const double edge = reverse ? w[k * pieces + best] : w[best * pieces + k];
        dist[k] = std::min(dist[k], dist[best] + edge);
      }
    }
    return dist;
  };
  const auto upper = shortest(false), lower = shortest(true);
  std::vector<double> shift(pieces);
  for (std::size_t k = 0; k < pieces; ++k) shift[k] = 0.5 * (upper[k] - lower[k]);
  for (std::size_t i = 0; i < m; ++i)
    if (piece[i] != none) u[i] += shift[piece[i]];
  for (std::size_t j = 0; j < n; ++j)
    if (piece[m + j] != none) v[j] -= shift[piece[m + j]];
}

}  // namespace detail

/// Optimal plan and duals for masses a (rows) and b (columns).
inline LpSolution solve_transport_lp(std::span<const double> a, std::span<const double> b, const CostMatrix& c,
                                     const LpOptions& options = {}) {
  if (a.size() != c.rows() || b.size() != c.cols()) throw Error(ErrorKind::shape, "marginals do not match the cost matrix");
  if (a.empty() || b.empty()) throw Error(ErrorKind::input, "empty marginals");
  if (a.size() * b.size() > options.max_entries)
    throw Error(ErrorKind::capacity, "transport problem exceeds the configured size limit");
  for (double x : a)
    if (!(x >= 0.0)) throw Error(ErrorKind::input, "negative source mass");
  for (double x : b)
    if (!(x >= 0.0)) throw Error(ErrorKind::input, "negative target mass");
  require_same_mass(a, b);
  detail::TransportSimplex simplex(a, b, c);
  simplex.run(options.max_pivots);
  auto sol = simplex.solution();
  detail::center_duals(sol.plan, sol.u, sol.v, c);
  return sol;
}

/// Grid-level LP solve. Duals are re-canonicalized by a double c-transform.
inline TransportResult solve_lp(const DensityField& rho, const DensityField& g, const RadialCost& cost,
                                const LpOptions& options = {}) {
  require_same_grid(rho.grid(), g.grid());
  const Grid& grid = rho.grid();
  const std::size_t n = grid.size();
  if (n * n > options.max_entries) throw Error(ErrorKind::capacity, "transport problem exceeds the configured size limit");
  const auto a = rho.cell_masses(), b = g.cell_masses();
  const auto c = CostMatrix::on_grid(grid, cost);
  auto lp = solve_transport_lp(a, b, c, options);
  auto pot = canonicalize(lp.v, c, options.threads);

  TransportResult r{grid, std::move(lp.plan), ScalarField(grid, std::move(pot.phi)), ScalarField(grid, std::move(pot.psi))};
  r.primal = lp.primal;
  r.dual = dual_value(a, r.phi.values, b, r.psi.values);
  r.gap = r.primal - r.dual;
  r.solver = "lp";
  r.parameters["cost"] = cost.describe();
  r.iterations = lp.pivots;
  return r;
}

}  // namespace otlab
