#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "nodal/common.hpp"

namespace nodal {

/// Discrete data of an isoparametric family on the round sphere S^n.
///
/// ell is the number of distinct principal curvatures, m_minus <= m_plus the
/// multiplicities.  Everything else -- the sphere dimension n, the focal
/// dimensions and all coefficient functions of the reduced ODE -- derives
/// from these three integers.
struct IsoparametricFamily {
  int ell = 0;
  int m_minus = 0;
  int m_plus = 0;
  int n = 0;  // sphere dimension, n - 1 = ell*(m_minus + m_plus)/2

  int focal_dim_minus() const { return n - 1 - m_minus; }
  int focal_dim_plus() const { return n - 1 - m_plus; }

  std::string str() const {
    return "(" + std::to_string(ell) + "," + std::to_string(m_minus) + "," +
           std::to_string(m_plus) + ")";
  }
};

inline IsoparametricFamily make_family(int ell, int m_minus, int m_plus) {
  if (ell != 1 && ell != 2 && ell != 3 && ell != 4 && ell != 6)
    fail_validation("ell must be one of {1,2,3,4,6}, got " + std::to_string(ell));
  if (m_minus < 1 || m_plus < m_minus)
    fail_validation("multiplicities must satisfy 1 <= m_minus <= m_plus");
  if (ell % 2 == 1 && m_minus != m_plus)
    fail_validation("odd ell requires equal multiplicities, got " + std::to_string(m_minus) +
                    " != " + std::to_string(m_plus));
  const long sum = static_cast<long>(m_minus) + m_plus;
  if ((ell * sum) % 2 != 0)
    fail_validation("ell*(m_minus+m_plus) must be even for integer sphere dimension");
  IsoparametricFamily f;
  f.ell = ell;
  f.m_minus = m_minus;
  f.m_plus = m_plus;
  f.n = static_cast<int>(1 + ell * sum / 2);
  if (f.n < 3) fail_validation("sphere dimension n must be at least 3, got " + std::to_string(f.n));
  if (f.focal_dim_minus() < 0 || f.focal_dim_plus() < 0)
    fail_validation("negative focal dimension");
  return f;
}

/// h(r) = ((m- + m+)/2) cos r - (m+ - m-)/2.  Strictly decreasing on [0,pi]
/// with h(0) = m-, h(pi) = -m+ and a single zero at a0.
inline double h_coeff(const IsoparametricFamily& f, double r) {
  const double half_sum = 0.5 * (f.m_minus + f.m_plus);
  const double half_diff = 0.5 * (f.m_plus - f.m_minus);
  return half_sum * std::cos(r) - half_diff;
}

/// The unique zero of h in (0, pi).
inline double a0(const IsoparametricFamily& f) {
  return std::acos(static_cast<double>(f.m_plus - f.m_minus) / (f.m_plus + f.m_minus));
}

/// Reflected coefficient h~(r) = -h(pi - r); swaps the roles of m- and m+.
inline double h_reflected(const IsoparametricFamily& f, double r) {
  const double half_sum = 0.5 * (f.m_minus + f.m_plus);
  const double half_diff = 0.5 * (f.m_plus - f.m_minus);
  return half_sum * std::cos(r) + half_diff;
}

struct AbCoeffs {
  double a;
  double b;
};

/// The isoparametric symbols: Delta f = a(f), |grad f|^2 = b(f) with
/// a(t) = -ell(n+ell-1) t + ell^2 (m+ - m-)/2 and b(t) = ell^2 (1 - t^2).
inline AbCoeffs ab_coeffs(const IsoparametricFamily& f, double t) {
  const double l = f.ell;
  AbCoeffs c;
  c.a = -l * (f.n + l - 1) * t + l * l * 0.5 * (f.m_plus - f.m_minus);
  c.b = l * l * (1.0 - t * t);
  return c;
}

struct AdmissibleRange {
  double lower = 1.0;
  double upper = 0.0;     // +inf when unbounded
  double critical = 0.0;  // Sobolev critical exponent (n+2)/(n-2)
  bool unbounded = false;

  bool contains(double p) const { return p > lower && (unbounded || p < upper); }
};

/// Exponent range 1 < p < (m+ + 3)/(m+ - 1); unbounded when m+ = 1.
inline AdmissibleRange admissible_p(const IsoparametricFamily& f) {
  AdmissibleRange r;
  r.critical = static_cast<double>(f.n + 2) / (f.n - 2);
  if (f.m_plus == 1) {
    r.unbounded = true;
    r.upper = std::numeric_limits<double>::infinity();
  } else {
    r.upper = static_cast<double>(f.m_plus + 3) / (f.m_plus - 1);
  }
  return r;
}

}  // namespace nodal
