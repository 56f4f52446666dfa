#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "nodal/common.hpp"
#include "nodal/family.hpp"
#include "nodal/ivp.hpp"

namespace nodal {

/// G(t) = mu (|t|^{p+1}/(p+1) - t^2/2), the potential of the nonlinearity.
inline double potential(double mu, double p, double t) {
  return mu * (std::pow(std::fabs(t), p + 1.0) / (p + 1.0) - 0.5 * t * t);
}

/// g(t) = mu (|t|^{p-1} t - t).
inline double force_term(double mu, double p, double t) { return mu * (odd_pow(t, p) - t); }

struct EnergySample {
  double r;
  double E;
};

/// Energy E = w'^2/2 + G(w) along a trajectory, with a monotonicity report
/// split by the sign of h: E decreases where h > 0 and increases where h < 0.
struct EnergyTrace {
  std::vector<EnergySample> samples;
  double max_rise_where_h_positive = 0.0;  // worst increase on intervals with h >= 0
  double max_drop_where_h_negative = 0.0;  // worst decrease on intervals with h <= 0
  double min_energy = std::numeric_limits<double>::infinity();
};

inline EnergyTrace energy_trace(const SolutionTrajectory& traj, const IsoparametricFamily& fam,
                                double mu, double p) {
  EnergyTrace tr;
  tr.samples.reserve(traj.nodes().size());
  for (const auto& n : traj.nodes()) {
    const double E = 0.5 * n.wp * n.wp + potential(mu, p, n.w);
    tr.samples.push_back({n.r, E});
    tr.min_energy = std::min(tr.min_energy, E);
  }
  for (std::size_t i = 0; i + 1 < tr.samples.size(); ++i) {
    const double rm = 0.5 * (tr.samples[i].r + tr.samples[i + 1].r);
    const double dE = tr.samples[i + 1].E - tr.samples[i].E;
    if (h_coeff(fam, rm) >= 0.0)
      tr.max_rise_where_h_positive = std::max(tr.max_rise_where_h_positive, dE);
    else
      tr.max_drop_where_h_negative = std::max(tr.max_drop_where_h_negative, -dE);
  }
  return tr;
}

/// Integrating factor q(r) = 2^{(m-+m+)/2} sin^{m-}(r/2) cos^{m+}(r/2);
/// q'/q = h(r)/sin r.
inline double q_factor(const IsoparametricFamily& fam, double r) {
  return std::pow(2.0, 0.5 * (fam.m_minus + fam.m_plus)) *
         std::pow(std::sin(0.5 * r), fam.m_minus) * std::pow(std::cos(0.5 * r), fam.m_plus);
}

/// Max deviation of the finite-difference logarithmic derivative of q from
/// h/sin r over a grid in (0.01, pi-0.01).
inline double q_identity_check(const IsoparametricFamily& fam, int grid = 10000) {
  double worst = 0.0;
  const double lo = 0.01, hi = kPi - 0.01, fd = 1e-5;
  for (int i = 0; i <= grid; ++i) {
    const double r = lo + (hi - lo) * i / grid;
    const double qp = (q_factor(fam, r + fd) - q_factor(fam, r - fd)) / (2 * fd);
    const double dev = std::fabs(qp / q_factor(fam, r) - h_coeff(fam, r) / std::sin(r));
    worst = std::max(worst, dev);
  }
  return worst;
}

namespace detail {

template <class F>
double adaptive_simpson_rec(const F& f, double a, double m, double b, double fa, double fm,
                            double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  const double err = left + right - whole;
  if (depth <= 0) fail_numerical("adaptive Simpson recursion exhausted");
  if (std::fabs(err) <= 15 * tol) return left + right + err / 15;
  return adaptive_simpson_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol, int depth = 48) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return adaptive_simpson_rec(f, a, m, b, fa, fm, fb, whole, tol, depth);
}

}  // namespace detail

/// zeta(r) = q(r) * integral_r^{a0} 1/q, computed by integrating its linear
/// ODE zeta' = (h/sin r) zeta - 1 from zeta(a0) = 0 down to r_min on a
/// geometric grid (the decaying direction, hence stable).  Queries in
/// between use cubic Hermite with slopes from the ODE; below r_min the
/// linear limit zeta ~ r is used.
class Zeta {
 public:
  explicit Zeta(const IsoparametricFamily& fam, double r_min = 1e-8, int grid = 120000)
      : fam_(fam), r_min_(r_min) {
    const double top = a0(fam);
    rs_.resize(grid + 1);
    zs_.resize(grid + 1);
    const double ratio = std::pow(r_min / top, 1.0 / grid);
    rs_[grid] = top;
    zs_[grid] = 0.0;
    auto slope = [this](double r, double z) {
      return (h_coeff(fam_, r) / std::sin(r)) * z - 1.0;
    };
    for (int i = grid; i > 0; --i) {
      const double r1 = rs_[i], r0 = r1 * ratio;
      const double hstep = r0 - r1;  // negative
      const double z1 = zs_[i];
      const double k1 = slope(r1, z1);
      const double k2 = slope(r1 + 0.5 * hstep, z1 + 0.5 * hstep * k1);
      const double k3 = slope(r1 + 0.5 * hstep, z1 + 0.5 * hstep * k2);
      const double k4 = slope(r1 + hstep, z1 + hstep * k3);
      rs_[i - 1] = r0;
      zs_[i - 1] = z1 + hstep / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
  }

  double operator()(double r) const {
    const double top = rs_.back();
    if (r >= top) {
      if (r > top + 1e-9) fail_validation("zeta: r beyond a0");
      return 0.0;
    }
    if (r <= r_min_) return zs_.front() * (r / r_min_);
    auto it = std::upper_bound(rs_.begin(), rs_.end(), r);
    const std::size_t i = static_cast<std::size_t>(it - rs_.begin());
    const double ra = rs_[i - 1], rb = rs_[i], h = rb - ra;
    const double t = (r - ra) / h;
    return detail::hermite_value(t, h, zs_[i - 1], derivative_of(ra, zs_[i - 1]), zs_[i],
                                 derivative_of(rb, zs_[i]));
  }

  double derivative(double r) const { return derivative_of(r, (*this)(r)); }

 private:
  double derivative_of(double r, double z) const {
    return (h_coeff(fam_, r) / std::sin(r)) * z - 1.0;
  }

  IsoparametricFamily fam_;
  double r_min_;
  std::vector<double> rs_, zs_;
};

/// Direct quadrature of the defining integral, used as a cross-check for the
/// ODE-integrated zeta.
inline double zeta_by_quadrature(const IsoparametricFamily& fam, double r, double tol = 1e-12) {
  const double top = a0(fam);
  if (!(r > 0) || r > top) fail_validation("zeta_by_quadrature: r must lie in (0, a0]");
  const double integral =
      detail::adaptive_simpson([&](double s) { return 1.0 / q_factor(fam, s); }, r, top, tol);
  return q_factor(fam, r) * integral;
}

struct PohozaevReport {
  double r = 0.0;
  double lhs = 0.0;  // q w w' + 2 q zeta E
  double rhs = 0.0;  // integral of q { G(w) zeta [4h/sin - 2] - g(w) w }
  double rel_error = 0.0;
};

/// Check the integral identity relating q w w' + 2 q zeta E to the integral
/// of q { G(w) zeta [4h/sin - 2] - g(w) w } on a forward trajectory.
inline std::vector<PohozaevReport> pohozaev_check(const SolutionTrajectory& traj,
                                                  const IsoparametricFamily& fam, double mu,
                                                  double p, const std::vector<double>& r_list,
                                                  double quad_tol = 1e-10) {
  const Zeta zeta(fam);
  // The multiplier of G(w) is 4 (h/sin r) zeta - 2: differentiating 2 q zeta
  // gives q [4 (h/sin r) zeta - 2], which is what the integration by parts
  // produces.  (Its r->0 limit is (2m- + 2)/(m- - 1); the product
  // zeta (4h/sin r - 2) tends to 4m-/(m- - 1) instead.)
  auto integrand = [&](double s) {
    if (s <= 0.0) return 0.0;
    const double w = traj.eval_w(s);
    const double q = q_factor(fam, s);
    const double bracket = 4.0 * h_coeff(fam, s) / std::sin(s) * zeta(s) - 2.0;
    return q * (potential(mu, p, w) * bracket - force_term(mu, p, w) * w);
  };

  std::vector<PohozaevReport> out;
  for (double r : r_list) {
    if (!(r > 0) || r > traj.r_end() + 1e-12)
      fail_validation("pohozaev_check: r outside the trajectory domain");
    PohozaevReport rep;
    rep.r = r;
    const double w = traj.eval_w(r), wp = traj.eval_wp(r);
    const double q = q_factor(fam, r);
    const double E = 0.5 * wp * wp + potential(mu, p, w);
    rep.lhs = q * w * wp + 2.0 * q * zeta(r) * E;

    // piecewise over the trajectory nodes: the integrand is smooth on each
    // Hermite interval
    double acc = 0.0;
    const auto& nodes = traj.nodes();
    for (std::size_t i = 0; i + 1 < nodes.size() && nodes[i].r < r; ++i) {
      const double a = nodes[i].r, b = std::min(nodes[i + 1].r, r);
      if (b <= a) continue;
      acc += detail::adaptive_simpson(integrand, a, b,
                                      quad_tol * std::max(1e-3, (b - a) / r));
    }
    rep.rhs = acc;
    const double denom = std::max(std::fabs(rep.lhs), std::fabs(rep.rhs));
    rep.rel_error = (denom > 1e-14) ? std::fabs(rep.lhs - rep.rhs) / denom
                                    : std::fabs(rep.lhs - rep.rhs);
    out.push_back(rep);
  }
  return out;
}

struct R0Report {
  double d = 0.0;
  double kappa = 0.0;
  double r0 = 0.0;
  double kappa1 = 0.0, kappa2 = 0.0, kappa3 = 0.0;
  double sin_half = 0.0, sin_lower = 0.0, sin_upper = 0.0;
  double cos_half = 0.0;
  double cos_lower_reading = 0.0;  // kappa1 e^{-d/g(kappa d)}
  double cos_lower_literal = 0.0;  // kappa1 e^{+d/g(kappa d)}, printed as in the source
  bool sin_bounds_hold = false;
  bool cos_bound_holds = false;
  bool monotone_above_kappa_d = false;
};

/// First radius where w = kappa d, with the decay bounds on sin(r0/2) and
/// cos(r0/2) evaluated.  Requires kappa d >= 1 and a zero inside the domain.
inline R0Report r0_locate(const SolutionTrajectory& traj, const IsoparametricFamily& fam,
                          double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0)) fail_validation("r0_locate: kappa must lie in (0,1)");
  const double d = traj.problem().d;
  const double mu = traj.problem().mu, p = traj.problem().p;
  if (kappa * d < 1.0) fail_validation("r0_locate: kappa*d below 1");
  if (traj.zeros().empty()) fail_validation("r0_locate: no zero before the domain end");

  R0Report rep;
  rep.d = d;
  rep.kappa = kappa;
  const double target = kappa * d;
  const auto& nodes = traj.nodes();
  std::size_t i = 0;
  while (i + 1 < nodes.size() && nodes[i + 1].w > target) ++i;
  if (i + 1 == nodes.size()) fail_numerical("r0_locate: threshold not reached");
  auto eval = [&](double r) { return traj.eval_w(r) - target; };
  rep.r0 = detail::refine_root(eval, nodes[i].r, nodes[i + 1].r, nodes[i].w - target,
                               nodes[i + 1].w - target, 1e-12);

  rep.monotone_above_kappa_d = true;
  for (const auto& n : nodes) {
    if (n.r > rep.r0) break;
    if (n.w < target - 1e-9 || n.w > d + 1e-9) rep.monotone_above_kappa_d = false;
  }

  const double m = fam.m_minus;
  rep.kappa1 = std::exp(0.5 * (kappa - 1.0) * (m + 1.0));
  rep.kappa2 = std::sqrt(0.5 * (1.0 - kappa) * (m + 1.0));
  rep.kappa3 = std::sqrt((m + 1.0) * (1.0 - kappa));
  const double gd = force_term(mu, p, d);
  const double gkd = force_term(mu, p, kappa * d);
  rep.sin_half = std::sin(0.5 * rep.r0);
  rep.cos_half = std::cos(0.5 * rep.r0);
  rep.sin_lower = rep.kappa2 * std::sqrt(d / gd);
  rep.sin_upper = rep.kappa3 * std::sqrt(d / gkd);
  rep.cos_lower_reading = rep.kappa1 * std::exp(-d / gkd);
  rep.cos_lower_literal = rep.kappa1 * std::exp(d / gkd);
  rep.sin_bounds_hold = (rep.sin_lower <= rep.sin_half) && (rep.sin_half <= rep.sin_upper);
  rep.cos_bound_holds = rep.cos_lower_reading <= rep.cos_half;
  return rep;
}

/// View of z(r) = amp^{-1} w(r / rate) with amp = d^{2/(p-1)}, rate = d sqrt(mu),
/// on the window [0, K]; the source trajectory must have initial value amp.
struct RescaledTrajectory {
  SolutionTrajectory source;
  double amp = 1.0;
  double rate = 1.0;
  double window = 0.0;
  std::vector<double> zeros;  // rescaled, within the window

  double z(double r) const { return source.eval_w(r / rate) / amp; }
  double zp(double r) const { return source.eval_wp(r / rate) / (amp * rate); }
};

inline RescaledTrajectory rescaled(const SolutionTrajectory& traj, double d, double mu, double p,
                                   double window) {
  if (!(d > 0)) fail_validation("rescaled: d must be positive");
  const double amp = std::pow(d, 2.0 / (p - 1.0));
  if (std::fabs(traj.problem().d - amp) > 1e-9 * (1.0 + amp))
    fail_validation("rescaled: trajectory initial value does not equal d^{2/(p-1)}");
  const double rate = d * std::sqrt(mu);
  if (window / rate > traj.r_end() * (1.0 + 1e-12))
    fail_validation("rescaled: window exceeds the source domain");
  RescaledTrajectory out;
  out.source = traj;
  out.amp = amp;
  out.rate = rate;
  out.window = window;
  for (double z : traj.zeros()) {
    const double zr = z * rate;
    if (zr <= window) out.zeros.push_back(zr);
  }
  return out;
}

/// The blow-up limit problem v'' + (H0/r) v' + |v|^{p-1} v = 0, v(0) = 1,
/// v'(0) = 0, integrated on [0, K] with the same machinery (no linear term).
inline SolutionTrajectory limit_solution(double H0, double p, double window,
                                         const OdeOptions& opt = {}) {
  if (H0 < 0) fail_validation("limit_solution: H0 must be nonnegative");
  if (!(p > 1)) fail_validation("limit_solution: p must exceed 1");
  if (!(window > 0)) fail_validation("limit_solution: empty window");
  validate_tolerances(opt.atol, opt.rtol);
  SingularProblem prob;
  prob.H = [H0](double) { return H0; };
  prob.H0 = H0;
  prob.Hp_bound = 0.0;
  prob.A = window;
  prob.mu = 1.0;
  prob.p = p;
  prob.d = 1.0;
  std::vector<std::string> warnings;
  if (!(0.5 * (H0 + 1.0) < (p + 1.0) / (p - 1.0)))
    warnings.push_back("outside the oscillatory regime: (H0+1)/2 >= (p+1)/(p-1)");
  struct ConstCoef {
    double H0;
    double operator()(double r) const { return H0 / r; }
  };
  return detail::integrate_direct(prob, ConstCoef{H0}, 1.0, 0.0, opt, std::move(warnings),
                                  SolutionTrajectory::Side::generic);
}

struct StepConstants {
  double theta = 0.0;
  double kappa = 0.0;
};

/// Constants (theta, kappa) with theta kappa^{p+1} > p+1, below the limit
/// 4 m- / (m- - 1) of zeta [4h/sin - 2] at r -> 0; they make
/// theta G(kappa d) - g(d) d eventually positive and growing.
inline StepConstants theta_step_constants(const IsoparametricFamily& fam, double p) {
  const double m = fam.m_minus;
  const double limit =
      (m >= 2) ? 4.0 * m / (m - 1.0) : std::numeric_limits<double>::infinity();
  if (!(p + 1.0 < limit))
    fail_validation("theta_step_constants: p+1 must stay below 4 m-/(m- - 1)");
  StepConstants s;
  s.theta = (m >= 2) ? 0.5 * (limit + (p + 1.0)) : 2.0 * (p + 1.0);
  s.kappa = std::pow(0.5 * (p + 1.0 + s.theta) / s.theta, 1.0 / (p + 1.0));
  return s;
}

/// The Step quantity [theta G(kappa d) - g(d) d] (d/g(d))^{(m-+1)/2}.
inline double step_quantity(const IsoparametricFamily& fam, double mu, double p, double theta,
                            double kappa, double d) {
  const double G = potential(mu, p, kappa * d);
  const double g = force_term(mu, p, d);
  return (theta * G - g * d) * std::pow(d / g, 0.5 * (fam.m_minus + 1.0));
}

}  // namespace nodal
