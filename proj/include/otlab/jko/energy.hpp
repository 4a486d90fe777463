#pragma once

// Internal energies f and the matching nonlinearity of the limit equation,
// g'(s) = s^(p-1) f''(s):
//   entropy  f(s) = s log s        f'' = 1/s            g(s) = s^(p-1) / (p-1)
//   power    f(s) = s^m / (m-1)    f'' = m s^(m-2)      g(s) = m s^(m+p-2) / (m+p-2)
// With p = 2 the entropy gives g(s) = s, i.e. the heat equation.

#include <cmath>
#include <sstream>
#include <string>

#include "otlab/error.hpp"
#include "otlab/geometry.hpp"

namespace otlab {

class Energy {
 public:
  enum class Kind { entropy, power };

  static Energy entropy() { return Energy(Kind::entropy, 1.0); }
  static Energy power(double m) {
    if (!(m > 1.0) || !std::isfinite(m)) throw Error(ErrorKind::parameter, "power energy exponent m must be > 1");
    return Energy(Kind::power, m);
  }

  Kind kind() const { return kind_; }
  double exponent() const { return m_; }

  /// Values below this are treated as 0 inside s log s.
  static constexpr double positivity_floor = 1e-12;

  double f(double s) const {
    if (kind_ == Kind::entropy) return s > positivity_floor ? s * std::log(s) : 0.0;
    return std::pow(s, m_) / (m_ - 1.0);
  }
  double f_prime(double s) const {
    if (kind_ == Kind::entropy) return std::log(std::max(s, positivity_floor)) + 1.0;
    return m_ / (m_ - 1.0) * std::pow(s, m_ - 1.0);
  }

  double g(double s, double p) const {
    if (kind_ == Kind::entropy) return std::pow(s, p - 1.0) / (p - 1.0);
    const double e = m_ + p - 2.0;
    return m_ * std::pow(s, e) / e;
  }
  double g_prime(double s, double p) const {
    if (kind_ == Kind::entropy) return p == 2.0 ? 1.0 : std::pow(s, p - 2.0);
    return m_ * std::pow(s, m_ + p - 3.0);
  }

  /// sum_cells f(rho) * vol.
  double integral(const Grid& grid, std::span<const double> rho) const {
    double s = 0.0;
    for (double v : rho) s += f(v);
    return s * grid.cell_volume();
  }
  double integral(const DensityField& rho) const { return integral(rho.grid(), rho.values()); }

  std::string describe() const {
    if (kind_ == Kind::entropy) return "entropy";
    std::ostringstream s;
    s << "power(m=" << m_ << ")";
    return s.str();
  }

 private:
  Energy(Kind kind, double m) : kind_(kind), m_(m) {}
  Kind kind_;
  double m_;
};

}  // namespace otlab
