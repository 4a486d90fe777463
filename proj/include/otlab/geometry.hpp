#pragma once

// Uniform cell-centered grids on boxes in R^1 / R^2, scalar / density / vector
// fields on them, and the finite-difference calculus the rest of the library
// is built on.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "otlab/error.hpp"

namespace otlab {

/// A point or vector of R^d, d <= 2. Unused trailing components are zero.
using Point = std::array<double, 2>;

inline Point operator+(Point a, Point b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Point operator-(Point a, Point b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Point operator*(double s, Point a) { return {s * a[0], s * a[1]}; }
inline double dot(Point a, Point b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(Point a) { return std::hypot(a[0], a[1]); }

class Grid {
 public:
  /// 1D grid of n cells on [lower, upper].
  static Grid line(double lower, double upper, int n) {
    return Grid(1, {lower, 0.0}, {upper, 0.0}, {n, 1});
  }
  /// 2D grid of nx*ny cells on [lower, upper] (component-wise).
  static Grid box(Point lower, Point upper, std::array<int, 2> counts) {
    return Grid(2, lower, upper, counts);
  }

  Grid(int dim, Point lower, Point upper, std::array<int, 2> counts)
      : dim_(dim), lower_(lower), upper_(upper), counts_(counts) {
    if (dim != 1 && dim != 2) throw Error(ErrorKind::dimension, "grid dimension must be 1 or 2");
    if (dim == 1) {
      lower_[1] = upper_[1] = 0.0;
      counts_[1] = 1;
    }
    for (int a = 0; a < dim; ++a) {
      if (!(upper_[a] > lower_[a]) || !std::isfinite(lower_[a]) || !std::isfinite(upper_[a]))
        throw Error(ErrorKind::parameter, "grid upper bound must exceed lower bound on every axis");
      if (counts_[a] < 1) throw Error(ErrorKind::parameter, "grid cell count must be positive");
    }
  }

  int dim() const { return dim_; }
  int count(int axis) const { return counts_[axis]; }
  double lower(int axis) const { return lower_[axis]; }
  double upper(int axis) const { return upper_[axis]; }
  Point lower() const { return lower_; }
  Point upper() const { return upper_; }
  /// Cell width along an axis.
  double width(int axis) const { return (upper_[axis] - lower_[axis]) / counts_[axis]; }
  /// Largest cell width over the active axes.
  double max_width() const { return dim_ == 1 ? width(0) : std::max(width(0), width(1)); }
  double cell_volume() const { return dim_ == 1 ? width(0) : width(0) * width(1); }
  std::size_t size() const { return static_cast<std::size_t>(counts_[0]) * counts_[1]; }

  /// Box diameter. The box sits in a closed ball of radius diameter()/2 around
  /// its center, so all differences x - y of points of the box have norm at
  /// most diameter(); this is the radius the cost functions must cover.
  double diameter() const {
    return dim_ == 1 ? upper_[0] - lower_[0] : std::hypot(upper_[0] - lower_[0], upper_[1] - lower_[1]);
  }
  double enclosing_radius() const { return 0.5 * diameter(); }

  /// Cells are numbered with the x index varying fastest.
  std::size_t index(int ix, int iy = 0) const {
    return static_cast<std::size_t>(iy) * counts_[0] + static_cast<std::size_t>(ix);
  }
  std::array<int, 2> coords(std::size_t idx) const {
    return {static_cast<int>(idx % counts_[0]), static_cast<int>(idx / counts_[0])};
  }
  Point center(std::size_t idx) const {
    const auto c = coords(idx);
    Point p{lower_[0] + (c[0] + 0.5) * width(0), 0.0};
    if (dim_ == 2) p[1] = lower_[1] + (c[1] + 0.5) * width(1);
    return p;
  }
  Point clamp(Point p) const {
    Point q = p;
    for (int a = 0; a < dim_; ++a) q[a] = std::clamp(p[a], lower_[a], upper_[a]);
    if (dim_ == 1) q[1] = 0.0;
    return q;
  }

  bool operator==(const Grid&) const = default;

 private:
  int dim_;
  Point lower_;
  Point upper_;
  std::array<int, 2> counts_;
};

inline void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw Error(ErrorKind::shape, "fields live on different grids");
}

/// A real function sampled at cell centers (potentials, integrands, ...).
struct ScalarField {
  Grid grid;
  std::vector<double> values;

  ScalarField(Grid g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) throw Error(ErrorKind::shape, "field size does not match grid");
  }
  explicit ScalarField(Grid g) : grid(g), values(g.size(), 0.0) {}
};

struct VectorField {
  Grid grid;
  std::vector<Point> values;
};

/// Nonnegative cellwise density. Mass is not forced to one; see normalize().
class DensityField {
 public:
  DensityField(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw Error(ErrorKind::shape, "density size does not match grid");
    for (double v : values_)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw Error(ErrorKind::input, "density values must be finite and nonnegative");
  }

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  double mass() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s * grid_.cell_volume();
  }
  /// Per-cell masses value * cellVolume.
  std::vector<double> cell_masses() const {
    std::vector<double> m(values_.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = values_[i] * grid_.cell_volume();
    return m;
  }
  ScalarField as_scalar() const { return ScalarField(grid_, values_); }

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Central differences inside, one-sided first-order differences on the
/// boundary layer of each axis.
inline VectorField gradient(const Grid& grid, std::span<const double> f) {
  if (f.size() != grid.size()) throw Error(ErrorKind::shape, "gradient input does not match grid");
  for (int a = 0; a < grid.dim(); ++a)
    if (grid.count(a) < 2) throw Error(ErrorKind::shape, "gradient needs at least two cells per axis");
  VectorField out{grid, std::vector<Point>(grid.size(), Point{0.0, 0.0})};
  const int nx = grid.count(0), ny = grid.count(1);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      Point& g = out.values[grid.index(ix, iy)];
      for (int a = 0; a < grid.dim(); ++a) {
        const int i = a == 0 ? ix : iy;
        const int n = grid.count(a);
        auto at = [&](int k) { return a == 0 ? f[grid.index(k, iy)] : f[grid.index(ix, k)]; };
        const double h = grid.width(a);
        if (i == 0)
          g[a] = (at(1) - at(0)) / h;
        else if (i == n - 1)
          g[a] = (at(n - 1) - at(n - 2)) / h;
        else
          g[a] = (at(i + 1) - at(i - 1)) / (2.0 * h);
      }
    }
  }
  return out;
}
inline VectorField gradient(const ScalarField& f) { return gradient(f.grid, f.values); }
inline VectorField gradient(const DensityField& f) { return gradient(f.grid(), f.values()); }

/// Discrete total variation: sum of |grad f| * cellVolume.
inline double tv_norm(const Grid& grid, std::span<const double> f) {
  const auto g = gradient(grid, f);
  double s = 0.0;
  for (const auto& v : g.values) s += norm(v);
  return s * grid.cell_volume();
}
inline double tv_norm(const DensityField& f) { return tv_norm(f.grid(), f.values()); }

inline DensityField normalize(const DensityField& f) {
  const double m = f.mass();
  if (!(m > 0.0)) throw Error(ErrorKind::degenerate_input, "cannot normalize a field with zero mass");
  std::vector<double> v(f.values().begin(), f.values().end());
  for (double& x : v) x /= m;
  return DensityField(f.grid(), std::move(v));
}

struct SmoothDensitySample {
  DensityField density;
  /// The floor after normalization; a lower bound on every cell value.
  double floor;
};

/// floor + |random truncated cosine series|, normalized. Deterministic in seed.
inline SmoothDensitySample sample_smooth_density(const Grid& grid, std::uint64_t seed, int mode_count,
                                                 double floor) {
  if (mode_count < 1) throw Error(ErrorKind::parameter, "mode_count must be at least 1");
  if (!(floor > 0.0)) throw Error(ErrorKind::parameter, "floor must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> amplitude(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  struct Mode {
    int kx, ky;
    double amp, phase;
  };
  std::vector<Mode> modes;
  const int ky_max = grid.dim() == 2 ? mode_count : 0;
  for (int ky = 0; ky <= ky_max; ++ky) {
    for (int kx = 0; kx <= mode_count; ++kx) {
      if (kx == 0 && ky == 0) continue;
      const double a = amplitude(rng) / (kx + ky);
      modes.push_back({kx, ky, a, phase(rng)});
    }
  }
  std::vector<double> v(grid.size());
  const double lx = grid.upper(0) - grid.lower(0);
  const double ly = grid.upper(1) - grid.lower(1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point c = grid.center(i);
    const double sx = (c[0] - grid.lower(0)) / lx;
    const double sy = grid.dim() == 2 ? (c[1] - grid.lower(1)) / ly : 0.0;
    double f = 0.0;
    for (const auto& m : modes) f += m.amp * std::cos(std::numbers::pi * (m.kx * sx + m.ky * sy) + m.phase);
    v[i] = floor + std::abs(f);
  }
  DensityField raw(grid, std::move(v));
  const double mass = raw.mass();
  return {normalize(raw), floor / mass};
}

inline DensityField random_smooth_density(const Grid& grid, std::uint64_t seed, int mode_count, double floor) {
  return sample_smooth_density(grid, seed, mode_count, floor).density;
}

struct BoundaryFacet {
  std::size_t cell;
  Point normal;
  double area;
};

/// One entry per boundary facet; a corner cell of a 2D box appears twice.
/// In 1D the facet "area" is the counting measure, 1 per endpoint.
inline std::vector<BoundaryFacet> boundary_cells_and_normals(const Grid& grid) {
  std::vector<BoundaryFacet> out;
  const int nx = grid.count(0), ny = grid.count(1);
  if (grid.dim() == 1) {
    out.push_back({grid.index(0), {-1.0, 0.0}, 1.0});
    out.push_back({grid.index(nx - 1), {1.0, 0.0}, 1.0});
    return out;
  }
  const double wx = grid.width(0), wy = grid.width(1);
  for (int iy = 0; iy < ny; ++iy) {
    out.push_back({grid.index(0, iy), {-1.0, 0.0}, wy});
    out.push_back({grid.index(nx - 1, iy), {1.0, 0.0}, wy});
  }
  for (int ix = 0; ix < nx; ++ix) {
    out.push_back({grid.index(ix, 0), {0.0, -1.0}, wx});
    out.push_back({grid.index(ix, ny - 1), {0.0, 1.0}, wx});
  }
  return out;
}

/// Multilinear interpolation of cell-centered samples at an arbitrary point;
/// points outside the hull of the cell centers are clamped onto it.
template <class T, class Sample>
T interpolate(const Grid& grid, Point p, Sample&& sample) {
  std::array<int, 2> i0{0, 0};
  std::array<double, 2> t{0.0, 0.0};
  for (int a = 0; a < grid.dim(); ++a) {
    const int n = grid.count(a);
    const double s = std::clamp((p[a] - grid.lower(a)) / grid.width(a) - 0.5, 0.0, n - 1.0);
    i0[a] = std::min(static_cast<int>(std::floor(s)), std::max(n - 2, 0));
    t[a] = s - i0[a];
  }
  if (grid.dim() == 1) {
    if (grid.count(0) == 1) return sample(grid.index(0));
    return (1.0 - t[0]) * sample(grid.index(i0[0])) + t[0] * sample(grid.index(i0[0] + 1));
  }
  const int ix1 = std::min(i0[0] + 1, grid.count(0) - 1);
  const int iy1 = std::min(i0[1] + 1, grid.count(1) - 1);
  return (1.0 - t[0]) * (1.0 - t[1]) * sample(grid.index(i0[0], i0[1])) +
         t[0] * (1.0 - t[1]) * sample(grid.index(ix1, i0[1])) +
         (1.0 - t[0]) * t[1] * sample(grid.index(i0[0], iy1)) + t[0] * t[1] * sample(grid.index(ix1, iy1));
}

inline double interpolate(const ScalarField& f, Point p) {
  return interpolate<double>(f.grid, p, [&](std::size_t i) { return f.values[i]; });
}
inline Point interpolate(const VectorField& f, Point p) {
  return interpolate<Point>(f.grid, p, [&](std::size_t i) { return f.values[i]; });
}

/// Quantile of `values` under the discrete measure `weights` (smallest value
/// whose cumulative weight reaches q of the total). Empty input yields 0.
inline double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q) {
  if (values.size() != weights.size()) throw Error(ErrorKind::shape, "quantile weights mismatch");
  if (values.empty()) return 0.0;
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) return 0.0;
  double acc = 0.0;
  for (auto i : order) {
    acc += weights[i];
    if (acc >= q * total) return values[i];
  }
  return values[order.back()];
}

}  // namespace otlab
