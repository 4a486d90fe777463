#pragma once

// Radial strictly convex costs h(z) = p_h(|z|) and radial convex functions
// H(z) = p_H(|z|). Everything d-dimensional is reduced to the 1D profile.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "otlab/error.hpp"
#include "otlab/geometry.hpp"
#include "otlab/quadrature.hpp"

namespace otlab {

/// Radial profile r -> p(r) on r >= 0 together with its derivative.
class RadialProfile {
 public:
  virtual ~RadialProfile() = default;
  virtual double value(double r) const = 0;
  virtual double slope(double r) const = 0;
  virtual std::string describe() const = 0;
  virtual std::optional<double> power_exponent() const { return std::nullopt; }
};

/// p(r) = r^p / p.
class PowerProfile final : public RadialProfile {
 public:
  explicit PowerProfile(double p) : p_(p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw Error(ErrorKind::parameter, "power cost exponent p must be > 1");
  }
  double value(double r) const override { return std::pow(r, p_) / p_; }
  double slope(double r) const override { return r > 0.0 ? std::pow(r, p_ - 1.0) : 0.0; }
  std::string describe() const override {
    std::ostringstream s;
    s << "power(p=" << p_ << ")";
    return s.str();
  }
  std::optional<double> power_exponent() const override { return p_; }

 private:
  double p_;
};

/// Profile given by samples (r_k, p_k) with r_0 = 0. The derivative is the
/// piecewise-linear interpolant through (0, 0) and the secant slopes placed at
/// the interval midpoints (extended linearly past the last one); the value is
/// p_0 plus its exact integral, so value and slope are consistent.
class TabulatedProfile final : public RadialProfile {
 public:
  TabulatedProfile(std::vector<double> radii, std::vector<double> values) {
    if (radii.size() != values.size() || radii.size() < 2)
      throw Error(ErrorKind::parameter, "tabulated cost needs matching radii/values with at least two entries");
    if (radii.front() != 0.0) throw Error(ErrorKind::parameter, "tabulated cost radii must start at 0");
    offset_ = values.front();
    knots_.push_back(0.0);
    slopes_.push_back(0.0);
    for (std::size_t k = 0; k + 1 < radii.size(); ++k) {
      const double dr = radii[k + 1] - radii[k];
      if (!(dr > 0.0)) throw Error(ErrorKind::parameter, "tabulated cost radii must be strictly increasing");
      const double s = (values[k + 1] - values[k]) / dr;
      if (!(s > slopes_.back()))
        throw Error(ErrorKind::parameter, "tabulated cost is not strictly convex increasing (secant slopes must increase from 0)");
      knots_.push_back(0.5 * (radii[k] + radii[k + 1]));
      slopes_.push_back(s);
    }
    integrals_.assign(knots_.size(), 0.0);
    for (std::size_t k = 1; k < knots_.size(); ++k)
      integrals_[k] = integrals_[k - 1] + 0.5 * (slopes_[k] + slopes_[k - 1]) * (knots_[k] - knots_[k - 1]);
    radii_ = std::move(radii);
    table_ = std::move(values);
  }

  double slope(double r) const override {
    const auto [k, dr] = locate(r);
    return slopes_[k] + dr * segment_rate(k);
  }
  double value(double r) const override {
    const auto [k, dr] = locate(r);
    return offset_ + integrals_[k] + slopes_[k] * dr + 0.5 * segment_rate(k) * dr * dr;
  }
  std::string describe() const override {
    std::ostringstream s;
    s << "tabulated(" << radii_.size() << " samples)";
    return s.str();
  }
  const std::vector<double>& radii() const { return radii_; }
  const std::vector<double>& table() const { return table_; }

 private:
  // Segment index and offset into it; the last segment is extended.
  std::pair<std::size_t, double> locate(double r) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), r);
    std::size_t k = it == knots_.begin() ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
    k = std::min(k, knots_.size() - 2);
    return {k, r - knots_[k]};
  }
  double segment_rate(std::size_t k) const {
    return (slopes_[k + 1] - slopes_[k]) / (knots_[k + 1] - knots_[k]);
  }

  std::vector<double> radii_, table_;
  std::vector<double> knots_, slopes_, integrals_;
  double offset_ = 0.0;
};

namespace detail {
inline double bump(double t) { return std::abs(t) < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0; }
}  // namespace detail

/// Profile of eta_eps * h for the radial bump mollifier eta_eps supported in
/// B(eps). 1D: Gauss rule on [-eps, eps]. 2D: polar rule (Gauss in the radius,
/// uniform in the angle), evaluated along the first axis.
class MollifiedProfile final : public RadialProfile {
 public:
  MollifiedProfile(std::shared_ptr<const RadialProfile> base, double epsilon, int order, int dim)
      : base_(std::move(base)), epsilon_(epsilon), order_(order), dim_(dim) {
    if (dim == 1) {
      const auto rule = gauss_legendre(order, -epsilon, epsilon);
      for (int k = 0; k < order; ++k) {
        offsets_.push_back({rule.nodes[k], 0.0});
        weights_.push_back(rule.weights[k] * detail::bump(rule.nodes[k] / epsilon));
      }
    } else if (dim == 2) {
      const auto rule = gauss_legendre(order, 0.0, epsilon);
      const int angles = 2 * order;
      for (int k = 0; k < order; ++k) {
        const double rho = rule.nodes[k];
        const double w = rule.weights[k] * rho * detail::bump(rho / epsilon) * (2.0 * std::numbers::pi / angles);
        for (int l = 0; l < angles; ++l) {
          const double th = 2.0 * std::numbers::pi * l / angles;
          offsets_.push_back({rho * std::cos(th), rho * std::sin(th)});
          weights_.push_back(w);
        }
      }
    } else {
      throw Error(ErrorKind::dimension, "mollification supports d = 1 or 2");
    }
    double total = 0.0;
    for (double w : weights_) total += w;
    for (double& w : weights_) w /= total;
  }

  double value(double r) const override {
    double s = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      const Point d{r - offsets_[k][0], -offsets_[k][1]};
      s += weights_[k] * base_->value(norm(d));
    }
    return s;
  }
  // Radial component of the mollified gradient at (r, 0).
  double slope(double r) const override {
    double s = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      const Point d{r - offsets_[k][0], -offsets_[k][1]};
      const double len = norm(d);
      if (len > 0.0) s += weights_[k] * base_->slope(len) * d[0] / len;
    }
    return s;
  }
  std::string describe() const override {
    std::ostringstream s;
    s << "mollified(" << base_->describe() << ", eps=" << epsilon_ << ", order=" << order_ << ", d=" << dim_ << ")";
    return s.str();
  }
  double epsilon() const { return epsilon_; }

 private:
  std::shared_ptr<const RadialProfile> base_;
  double epsilon_;
  int order_;
  int dim_;
  std::vector<Point> offsets_;
  std::vector<double> weights_;
};

/// The cost h(z) = p_h(|z|) on the closed ball of radius R.
class RadialCost {
 public:
  RadialCost(std::shared_ptr<const RadialProfile> profile, double radius)
      : profile_(std::move(profile)), radius_(radius) {
    if (!profile_) throw Error(ErrorKind::parameter, "cost profile is null");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw Error(ErrorKind::parameter, "cost radius must be positive");
  }
  static RadialCost power(double p, double radius) {
    return RadialCost(std::make_shared<PowerProfile>(p), radius);
  }
  static RadialCost tabulated(std::vector<double> radii, std::vector<double> values, double radius) {
    return RadialCost(std::make_shared<TabulatedProfile>(std::move(radii), std::move(values)), radius);
  }

  double radius() const { return radius_; }
  const std::shared_ptr<const RadialProfile>& profile_ptr() const { return profile_; }
  double profile(double r) const { return profile_->value(r); }
  double profile_slope(double r) const { return profile_->slope(r); }
  std::optional<double> power_exponent() const { return profile_->power_exponent(); }
  std::string describe() const { return profile_->describe(); }

  double operator()(Point z) const { return profile_->value(norm(z)); }

  /// Largest |grad h| on the closed ball of radius R.
  double slope_limit() const { return profile_->slope(radius_); }

  Point grad(Point z) const {
    const double r = norm(z);
    if (r > radius_ * (1.0 + 1e-12)) throw Error(ErrorKind::domain, "|z| exceeds the cost radius");
    if (r == 0.0) return {0.0, 0.0};
    return (profile_->slope(r) / r) * z;
  }

  /// Inverse of grad: the z in B(R) with grad(z) = w, by bisection on the
  /// radial profile.
  Point grad_star(Point w) const {
    const double s = norm(w);
    const double limit = slope_limit();
    if (s > limit * (1.0 + 1e-12)) throw Error(ErrorKind::range, "|w| exceeds the range of grad h on B(R)");
    if (s == 0.0) return {0.0, 0.0};
    return (slope_inverse(std::min(s, limit)) / s) * w;
  }

  /// r in [0, R] with p_h'(r) = s.
  double slope_inverse(double s) const {
    double lo = 0.0, hi = radius_;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (profile_->slope(mid) < s ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  /// Sampled strict-convexity check: p_h' strictly increasing on (0, R] and
  /// vanishing at 0.
  bool is_strictly_convex(int samples = 1000) const {
    double prev = profile_->slope(0.0);
    if (std::abs(prev) > 1e-10 * (1.0 + std::abs(slope_limit()))) return false;
    for (int k = 1; k <= samples; ++k) {
      const double s = profile_->slope(radius_ * k / samples);
      if (!(s > prev)) return false;
      prev = s;
    }
    return true;
  }

 private:
  std::shared_ptr<const RadialProfile> profile_;
  double radius_;
};

/// eta_eps * h. The base profile is evaluated up to R + eps.
inline RadialCost mollify(const RadialCost& cost, double epsilon, int quadrature_order, int dim = 1) {
  if (!(epsilon > 0.0) || !(epsilon < cost.radius() / 4.0))
    throw Error(ErrorKind::parameter, "mollification epsilon must lie in (0, R/4)");
  if (quadrature_order < 2) throw Error(ErrorKind::parameter, "quadrature order must be at least 2");
  return RadialCost(std::make_shared<MollifiedProfile>(cost.profile_ptr(), epsilon, quadrature_order, dim),
                    cost.radius());
}

/// sup over samples in [0, R] of |p_a' - p_b'|.
inline double sup_slope_deviation(const RadialCost& a, const RadialCost& b, int samples = 2000) {
  double sup = 0.0;
  for (int k = 0; k <= samples; ++k) {
    const double r = a.radius() * k / samples;
    sup = std::max(sup, std::abs(a.profile_slope(r) - b.profile_slope(r)));
  }
  return sup;
}

struct SemiconcavityBound {
  double constant;
  double radius;
};

/// Largest eigenvalue of D^2 h over sampled radii, max(p'', p'/r), with p''
/// from centered second differences of the profile, plus a 10% margin.
inline SemiconcavityBound semiconcavity_constant(const RadialCost& cost, double radius, int samples) {
  if (samples < 1 || !(radius > 0.0)) throw Error(ErrorKind::parameter, "semiconcavity needs samples >= 1, R > 0");
  const double step = radius * 1e-4;
  double worst = 0.0;
  for (int k = 1; k <= samples; ++k) {
    const double r = radius * k / samples;
    const double second =
        (cost.profile(r + step) - 2.0 * cost.profile(r) + cost.profile(std::abs(r - step))) / (step * step);
    const double tangential = cost.profile_slope(r) / r;
    if (!std::isfinite(second) || !std::isfinite(tangential))
      throw Error(ErrorKind::numerical, "non-finite second difference of the cost profile");
    worst = std::max({worst, second, tangential});
  }
  return {1.1 * worst, radius};
}

/// Radial convex H with p_H(r) = scale * r^q / q and grad H(z) = 0 whenever
/// |z| <= zero_threshold.
class HFunction {
 public:
  explicit HFunction(double q, double scale = 1.0, double zero_threshold = 1e-9)
      : q_(q), scale_(scale), zero_threshold_(zero_threshold) {
    if (!(q > 1.0) || !std::isfinite(q)) throw Error(ErrorKind::parameter, "H exponent q must be > 1");
    if (!(scale > 0.0)) throw Error(ErrorKind::parameter, "H scale must be positive");
    if (!(zero_threshold >= 0.0)) throw Error(ErrorKind::parameter, "H zero threshold must be >= 0");
  }

  double exponent() const { return q_; }
  double scale() const { return scale_; }
  double zero_threshold() const { return zero_threshold_; }
  HFunction scaled(double factor) const { return HFunction(q_, scale_ * factor, zero_threshold_); }

  double value(Point z) const { return scale_ * std::pow(norm(z), q_) / q_; }
  double slope(double r) const { return scale_ * std::pow(r, q_ - 1.0); }

  Point grad(Point z) const {
    const double r = norm(z);
    if (r <= zero_threshold_) return {0.0, 0.0};
    return (slope(r) / r) * z;
  }

  std::string describe() const {
    std::ostringstream s;
    s << "power(q=" << q_;
    if (scale_ != 1.0) s << ", scale=" << scale_;
    s << ")";
    return s.str();
  }

 private:
  double q_;
  double scale_;
  double zero_threshold_;
};

}  // namespace otlab
