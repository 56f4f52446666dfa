#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nodal/common.hpp"
#include "nodal/family.hpp"

namespace nodal {

/// One singular initial value problem
///   w'' + (H(r)/r) w' + mu (|w|^{p-1} w - w) = 0 on [0, A],
///   w(0) = d, w'(0) = 0,
/// with H continuous on [0, A] and finite at 0.
struct SingularProblem {
  std::function<double(double)> H;  // evaluated for r > 0 only
  double H0 = 0.0;                  // H(0)
  double Hp_bound = 1.0;            // bound on |H'| near 0, used by the launch
  double A = 0.0;
  double mu = 1.0;
  double p = 3.0;
  double d = 0.0;
};

struct OdeOptions {
  double atol = 1e-10;
  double rtol = 1e-10;
  double max_step_fraction = 0.02;  // max step = fraction of the domain length
  double guard = 10.0;              // interpolant-defect safety vs the 100x contract
  double event_r_tol = 1e-12;       // root refinement tolerance in r
  double rescale_threshold = 1e4;   // |d| above which the rescaled route is used
  std::size_t max_steps = 80'000'000;

  OdeOptions with_tol(double a, double r) const {
    OdeOptions o = *this;
    o.atol = a;
    o.rtol = r;
    return o;
  }
};

struct TrajectoryNode {
  double r;
  double w;
  double wp;
  double wpp;
};

namespace detail {

// Cubic Hermite basis on one interval, t in [0,1], h the interval length.
inline double hermite_value(double t, double h, double y0, double s0, double y1, double s1) {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * s0 + (3 * t2 - 2 * t3) * y1 +
         (t3 - t2) * h * s1;
}

inline double hermite_slope(double t, double h, double y0, double s0, double y1, double s1) {
  const double t2 = t * t;
  return (6 * t2 - 6 * t) * (y0 - y1) / h + (3 * t2 - 4 * t + 1) * s0 + (3 * t2 - 2 * t) * s1;
}

// w'' = -coef(r) w' - (a_nl |w|^{p-1} w - a_lin w).
// The singular forward/backward problems use a_nl = a_lin = mu; the
// rescaled route and the blow-up limit problem use other pairs.
template <class Coef>
struct Oscillator {
  Coef coef;
  double a_nl;
  double a_lin;
  double p;

  double force(double w) const { return a_nl * odd_pow(w, p) - a_lin * w; }
  double accel(double r, double w, double wp) const { return -coef(r) * wp - force(w); }
};

// Series coefficients of w = d + c2 r^2 + c4 r^4 + ... near the singular end.
inline double series_c2(double H0, double force_d) { return -force_d / (2.0 * (1.0 + H0)); }

template <class Ode>
double series_c4(const Ode& ode, double H0, double d) {
  // from collecting the r^2 terms: (12 + 4 H0) c4 + F'(d) c2 = 0
  const double fp = ode.a_nl * ode.p * std::pow(std::fabs(d), ode.p - 1.0) - ode.a_lin;
  return -fp * series_c2(H0, ode.force(d)) / (4.0 * (3.0 + H0));
}

struct CoreResult {
  std::vector<TrajectoryNode> nodes;
  std::size_t steps = 0;
  std::size_t rejects = 0;
};

// Dormand-Prince 5(4) with PI step control plus a two-point defect guard
// that keeps the cubic Hermite interpolant ODE-consistent:
//   |residual| <= guard * (atol + rtol * (|w''| + |coef w'| + |force|))
// at the worst-case points of every accepted step.
template <class Ode>
CoreResult integrate_core(const Ode& ode, double r0, double w0, double wp0, double r_end,
                          const OdeOptions& opt) {
  CoreResult out;
  const double span = r_end - r0;
  if (!(span > 0)) fail_validation("integrate: empty interval");
  const double hmax = opt.max_step_fraction * span;

  double r = r0, w = w0, v = wp0;
  double k1w = v, k1v = ode.accel(r, w, v);
  out.nodes.push_back({r, w, v, k1v});

  double h = std::min(hmax, 1e-3 * span);
  double errold = 1e-4;
  // defect-guard sample points: extrema of the Hermite derivative error
  constexpr double gp = 0.28867513459481287;  // 1/(2 sqrt 3)

  while (r < r_end) {
    const double gap = r_end - r;
    if (gap <= 32 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(r_end))) {
      out.nodes.back().r = r_end;  // snap the closing ulps
      break;
    }
    if (out.steps + out.rejects > opt.max_steps)
      fail_budget("integrate: step budget exhausted at r=" + std::to_string(r));
    if (h < 1e-14)
      fail_numerical("integrate: step size collapse at r=" + std::to_string(r) +
                     " (w=" + std::to_string(w) + ", w'=" + std::to_string(v) + ")");
    bool hits_end = false;
    if (h >= gap) {
      h = gap;
      hits_end = true;
    }

    // stages; state y = (w, v), y' = (v, accel)
    const double k2w = v + h * (0.2 * k1v);
    const double r2 = r + 0.2 * h;
    const double w2 = w + h * (0.2 * k1w);
    const double k2v = ode.accel(r2, w2, k2w);

    const double r3 = r + 0.3 * h;
    const double w3 = w + h * (3.0 / 40 * k1w + 9.0 / 40 * k2w);
    const double v3 = v + h * (3.0 / 40 * k1v + 9.0 / 40 * k2v);
    const double k3w = v3, k3v = ode.accel(r3, w3, v3);

    const double r4 = r + 0.8 * h;
    const double w4 = w + h * (44.0 / 45 * k1w - 56.0 / 15 * k2w + 32.0 / 9 * k3w);
    const double v4 = v + h * (44.0 / 45 * k1v - 56.0 / 15 * k2v + 32.0 / 9 * k3v);
    const double k4w = v4, k4v = ode.accel(r4, w4, v4);

    const double r5 = r + 8.0 / 9 * h;
    const double w5 = w + h * (19372.0 / 6561 * k1w - 25360.0 / 2187 * k2w +
                               64448.0 / 6561 * k3w - 212.0 / 729 * k4w);
    const double v5 = v + h * (19372.0 / 6561 * k1v - 25360.0 / 2187 * k2v +
                               64448.0 / 6561 * k3v - 212.0 / 729 * k4v);
    const double k5w = v5, k5v = ode.accel(r5, w5, v5);

    const double r6 = r + h;
    const double w6 = w + h * (9017.0 / 3168 * k1w - 355.0 / 33 * k2w + 46732.0 / 5247 * k3w +
                               49.0 / 176 * k4w - 5103.0 / 18656 * k5w);
    const double v6 = v + h * (9017.0 / 3168 * k1v - 355.0 / 33 * k2v + 46732.0 / 5247 * k3v +
                               49.0 / 176 * k4v - 5103.0 / 18656 * k5v);
    const double k6w = v6, k6v = ode.accel(r6, w6, v6);

    const double yw = w + h * (35.0 / 384 * k1w + 500.0 / 1113 * k3w + 125.0 / 192 * k4w -
                               2187.0 / 6784 * k5w + 11.0 / 84 * k6w);
    const double yv = v + h * (35.0 / 384 * k1v + 500.0 / 1113 * k3v + 125.0 / 192 * k4v -
                               2187.0 / 6784 * k5v + 11.0 / 84 * k6v);
    const double rn = r + h;
    const double k7w = yv, k7v = ode.accel(rn, yw, yv);

    const double ew = h * (71.0 / 57600 * k1w - 71.0 / 16695 * k3w + 71.0 / 1920 * k4w -
                           17253.0 / 339200 * k5w + 22.0 / 525 * k6w - 1.0 / 40 * k7w);
    const double ev = h * (71.0 / 57600 * k1v - 71.0 / 16695 * k3v + 71.0 / 1920 * k4v -
                           17253.0 / 339200 * k5v + 22.0 / 525 * k6v - 1.0 / 40 * k7v);

    if (!std::isfinite(yw) || !std::isfinite(yv))
      fail_numerical("integrate: non-finite state at r=" + std::to_string(rn) +
                     " (last finite w=" + std::to_string(w) + ", w'=" + std::to_string(v) +
                     "); likely blow-up");

    const double scw = opt.atol + opt.rtol * std::max(std::fabs(w), std::fabs(yw));
    const double scv = opt.atol + opt.rtol * std::max(std::fabs(v), std::fabs(yv));
    const double err = std::sqrt(0.5 * (sq(ew / scw) + sq(ev / scv)));

    if (err > 1.0) {
      ++out.rejects;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      continue;
    }

    // Defect guard on the accepted candidate.  The mean slope (yv - v)/h is
    // taken from the stage combination directly, which avoids the
    // cancellation noise of differencing the endpoint values.
    const double mean_accel = 35.0 / 384 * k1v + 500.0 / 1113 * k3v + 125.0 / 192 * k4v -
                              2187.0 / 6784 * k5v + 11.0 / 84 * k6v;
    double worst_ratio = 0.0;
    for (double t : {0.5 - gp, 0.5 + gp}) {
      const double rm = r + t * h;
      const double wm = hermite_value(t, h, w, k1w, yw, k7w);
      const double vm = hermite_value(t, h, v, k1v, yv, k7v);
      const double vs = (6 * t - 6 * t * t) * mean_accel + (3 * t * t - 4 * t + 1) * k1v +
                        (3 * t * t - 2 * t) * k7v;
      const double cf = ode.coef(rm);
      const double fo = ode.force(wm);
      const double res = vs + cf * vm + fo;
      const double scale = std::fabs(vs) + std::fabs(cf * vm) + std::fabs(fo);
      const double bound = opt.guard * (opt.atol + opt.rtol * scale);
      worst_ratio = std::max(worst_ratio, std::fabs(res) / bound);
    }
    if (worst_ratio > 1.0) {
      ++out.rejects;
      h *= std::min(0.9, std::max(0.25, 0.9 * std::pow(worst_ratio, -1.0 / 3.0)));
      continue;
    }

    // accept
    ++out.steps;
    r = hits_end ? r_end : rn;
    w = yw;
    v = yv;
    k1w = k7w;
    k1v = k7v;
    out.nodes.push_back({r, w, v, k1v});

    const double e = std::max(err, 1e-10);
    double fac = 0.9 * std::pow(e, -0.17) * std::pow(errold, 0.04);
    if (worst_ratio > 0.0) fac = std::min(fac, 0.9 * std::pow(worst_ratio, -1.0 / 3.0));
    fac = std::min(5.0, std::max(0.2, fac));
    errold = e;
    h = std::min(h * fac, hmax);
  }
  return out;
}

// Bracketed root of a cubic Hermite channel on one node interval.
// Bisection with a secant proposal when it stays inside the bracket.
template <class Eval>
double refine_root(const Eval& f, double ra, double rb, double fa, double fb, double tol) {
  for (int it = 0; it < 200 && (rb - ra) > tol; ++it) {
    double rm = 0.5 * (ra + rb);
    if (fb != fa) {
      const double rs = ra - fa * (rb - ra) / (fb - fa);
      const double margin = 0.01 * (rb - ra);
      if (rs > ra + margin && rs < rb - margin) rm = rs;
    }
    const double fm = f(rm);
    if (fm == 0.0) return rm;
    if ((fa < 0) != (fm < 0)) {
      rb = rm;
      fb = fm;
    } else {
      ra = rm;
      fa = fm;
    }
  }
  return 0.5 * (ra + rb);
}

}  // namespace detail

/// Dense numerical solution of one singular IVP: nodes with (r, w, w', w''),
/// a piecewise cubic Hermite interpolant, and refined zero / critical-point
/// locations.  Immutable once built.
class SolutionTrajectory {
 public:
  enum class Side { forward, backward, generic };

  SolutionTrajectory() = default;
  SolutionTrajectory(std::vector<TrajectoryNode> nodes, std::vector<double> zeros,
                     std::vector<double> criticals, SingularProblem problem,
                     std::function<double(double)> coef, double a_nl, double a_lin, double p,
                     Side side, bool degenerate, std::vector<std::string> warnings)
      : nodes_(std::move(nodes)),
        zeros_(std::move(zeros)),
        criticals_(std::move(criticals)),
        problem_(std::move(problem)),
        coef_(std::move(coef)),
        a_nl_(a_nl),
        a_lin_(a_lin),
        p_(p),
        side_(side),
        degenerate_(degenerate),
        warnings_(std::move(warnings)) {}

  const std::vector<TrajectoryNode>& nodes() const { return nodes_; }
  const std::vector<double>& zeros() const { return zeros_; }
  const std::vector<double>& criticals() const { return criticals_; }
  const SingularProblem& problem() const { return problem_; }
  Side side() const { return side_; }
  bool degenerate_constant() const { return degenerate_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  double r_begin() const { return nodes_.front().r; }
  double r_end() const { return nodes_.back().r; }

  double eval_w(double r) const {
    const auto [i, t, h] = locate(r);
    const TrajectoryNode &a = nodes_[i], &b = nodes_[i + 1];
    return detail::hermite_value(t, h, a.w, a.wp, b.w, b.wp);
  }

  double eval_wp(double r) const {
    const auto [i, t, h] = locate(r);
    const TrajectoryNode &a = nodes_[i], &b = nodes_[i + 1];
    return detail::hermite_value(t, h, a.wp, a.wpp, b.wp, b.wpp);
  }

  /// Defect of the interpolant in the ODE at r:
  ///   w''(r) + coef(r) w'(r) + a_nl |w|^{p-1} w - a_lin w.
  double residual_at(double r) const {
    const auto [i, t, h] = locate(r);
    const TrajectoryNode &a = nodes_[i], &b = nodes_[i + 1];
    const double wm = detail::hermite_value(t, h, a.w, a.wp, b.w, b.wp);
    const double vm = detail::hermite_value(t, h, a.wp, a.wpp, b.wp, b.wpp);
    const double vs = detail::hermite_slope(t, h, a.wp, a.wpp, b.wp, b.wpp);
    return vs + coef_(r) * vm + a_nl_ * odd_pow(wm, p_) - a_lin_ * wm;
  }

  /// Local scale of the ODE terms at r, the reference for residual bounds.
  double residual_scale_at(double r) const {
    const auto [i, t, h] = locate(r);
    const TrajectoryNode &a = nodes_[i], &b = nodes_[i + 1];
    const double wm = detail::hermite_value(t, h, a.w, a.wp, b.w, b.wp);
    const double vm = detail::hermite_value(t, h, a.wp, a.wpp, b.wp, b.wpp);
    const double vs = detail::hermite_slope(t, h, a.wp, a.wpp, b.wp, b.wpp);
    return std::fabs(vs) + std::fabs(coef_(r) * vm) +
           std::fabs(a_nl_ * odd_pow(wm, p_) - a_lin_ * wm);
  }

 private:
  struct Loc {
    std::size_t i;
    double t;
    double h;
  };

  Loc locate(double r) const {
    if (nodes_.size() < 2) fail_numerical("trajectory has no interior");
    const double lo = nodes_.front().r, hi = nodes_.back().r;
    if (r < lo - 1e-9 || r > hi + 1e-9)
      fail_validation("evaluation point r=" + std::to_string(r) + " outside trajectory domain [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
    r = std::min(std::max(r, lo), hi);
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r,
                               [](double x, const TrajectoryNode& n) { return x < n.r; });
    std::size_t i = static_cast<std::size_t>(it - nodes_.begin());
    if (i == 0) i = 1;
    if (i >= nodes_.size()) i = nodes_.size() - 1;
    const double r0 = nodes_[i - 1].r, h = nodes_[i].r - r0;
    return {i - 1, h > 0 ? (r - r0) / h : 0.0, h};
  }

  std::vector<TrajectoryNode> nodes_;
  std::vector<double> zeros_, criticals_;
  SingularProblem problem_;
  std::function<double(double)> coef_;
  double a_nl_ = 1.0, a_lin_ = 1.0, p_ = 3.0;
  Side side_ = Side::generic;
  bool degenerate_ = false;
  std::vector<std::string> warnings_;
};

namespace detail {

inline void extract_events(const std::vector<TrajectoryNode>& nodes, bool want_zero, double tol,
                           std::vector<double>* out) {
  auto value = [&](const TrajectoryNode& n) { return want_zero ? n.w : n.wp; };
  auto record = [&](double r) {
    if (out->empty() || r - out->back() > tol) out->push_back(r);
  };
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const TrajectoryNode &a = nodes[i], &b = nodes[i + 1];
    const double fa = value(a), fb = value(b);
    if (fa == 0.0) record(a.r);
    if (fa * fb < 0.0) {
      const double h = b.r - a.r;
      auto eval = [&](double r) {
        const double t = (r - a.r) / h;
        return want_zero ? hermite_value(t, h, a.w, a.wp, b.w, b.wp)
                         : hermite_value(t, h, a.wp, a.wpp, b.wp, b.wpp);
      };
      record(refine_root(eval, a.r, b.r, fa, fb, tol));
    }
  }
  if (!nodes.empty() && value(nodes.back()) == 0.0) record(nodes.back().r);
}

struct LaunchState {
  double r1;
  double w1;
  double v1;
  double c2;
};

// Launch at a radius keeping the series truncation below tolerance; the naive
// atol^{1/4} rule ignores the growth of the series coefficients with |d|.
// The launch state itself carries the quartic correction (with the curvature
// of H measured from the coefficient function), so the first Hermite interval
// is ODE-consistent to the same order as the integrated ones.
template <class Ode>
LaunchState make_launch(const Ode& ode, double H0, double Hp_bound, double d, double A,
                        double atol, double rtol) {
  const double c2 = series_c2(H0, ode.force(d));
  const double c4_flat = std::fabs(series_c4(ode, H0, d));
  const double c3 = std::fabs(c2) * Hp_bound;
  const double tol = atol + rtol * std::fabs(d);
  const double r1 = std::min(1e-3 * A,
                             std::max(1e-7, std::pow(tol / (1.0 + c4_flat + c3), 0.25)));
  const double H2 = (ode.coef(r1) * r1 - H0) / (r1 * r1);
  const double fp = ode.a_nl * ode.p * std::pow(std::fabs(d), ode.p - 1.0) - ode.a_lin;
  const double c4 = -c2 * (fp + 2.0 * H2) / (4.0 * (3.0 + H0));
  LaunchState s;
  s.r1 = r1;
  s.w1 = d + c2 * r1 * r1 + c4 * r1 * r1 * r1 * r1;
  s.v1 = 2.0 * c2 * r1 + 4.0 * c4 * r1 * r1 * r1;
  s.c2 = c2;
  return s;
}

template <class Coef>
SolutionTrajectory integrate_direct(const SingularProblem& prob, Coef coef, double a_nl,
                                    double a_lin, const OdeOptions& opt,
                                    std::vector<std::string> warnings,
                                    SolutionTrajectory::Side side) {
  const Oscillator<Coef> ode{coef, a_nl, a_lin, prob.p};
  const double d = prob.d;
  const bool degenerate = (ode.force(d) == 0.0);

  const LaunchState launch =
      make_launch(ode, prob.H0, prob.Hp_bound, d, prob.A, opt.atol, opt.rtol);
  auto core = integrate_core(ode, launch.r1, launch.w1, launch.v1, prob.A, opt);

  std::vector<TrajectoryNode> nodes;
  nodes.reserve(core.nodes.size() + 1);
  nodes.push_back({0.0, d, 0.0, 2.0 * launch.c2});
  nodes.insert(nodes.end(), core.nodes.begin(), core.nodes.end());

  std::vector<double> zeros, criticals;
  if (!degenerate) {
    extract_events(nodes, true, opt.event_r_tol, &zeros);
    extract_events(nodes, false, opt.event_r_tol, &criticals);
  }
  return SolutionTrajectory(std::move(nodes), std::move(zeros), std::move(criticals), prob,
                            std::function<double(double)>(coef), a_nl, a_lin, prob.p, side,
                            degenerate, std::move(warnings));
}

// Rescaled route for large |d|: integrate z(s) = w(s/(delta sqrt(mu)))/|d| with
// delta = |d|^{(p-1)/2}, which oscillates at unit amplitude and unit frequency,
// then map nodes and events back.  The change of variables is exact, so the
// relative defect bound carries over.
template <class Coef>
SolutionTrajectory integrate_rescaled(const SingularProblem& prob, Coef coef,
                                      const OdeOptions& opt, std::vector<std::string> warnings,
                                      SolutionTrajectory::Side side) {
  const double D = std::fabs(prob.d);
  const double sgn = prob.d < 0 ? -1.0 : 1.0;
  const double delta = std::pow(D, 0.5 * (prob.p - 1.0));
  const double rate = delta * std::sqrt(prob.mu);  // s = rate * r

  struct ScaledCoef {
    Coef base;
    double inv_rate;
    double operator()(double s) const { return base(s * inv_rate) * inv_rate; }
  };
  const ScaledCoef zcoef{coef, 1.0 / rate};
  const Oscillator<ScaledCoef> zode{zcoef, 1.0, 1.0 / (delta * delta), prob.p};

  const double S = rate * prob.A;
  const LaunchState launch =
      make_launch(zode, prob.H0, prob.Hp_bound / rate, 1.0, S, opt.atol, opt.rtol);
  auto core = integrate_core(zode, launch.r1, launch.w1, launch.v1, S, opt);

  std::vector<TrajectoryNode> nodes;
  nodes.reserve(core.nodes.size() + 1);
  nodes.push_back({0.0, sgn * D, 0.0, sgn * D * rate * rate * 2.0 * launch.c2});
  for (const TrajectoryNode& zn : core.nodes)
    nodes.push_back({zn.r / rate, sgn * D * zn.w, sgn * D * rate * zn.wp,
                     sgn * D * rate * rate * zn.wpp});

  std::vector<double> zeros, criticals;
  extract_events(nodes, true, opt.event_r_tol, &zeros);
  extract_events(nodes, false, opt.event_r_tol, &criticals);
  return SolutionTrajectory(std::move(nodes), std::move(zeros), std::move(criticals), prob,
                            std::function<double(double)>(coef), prob.mu, prob.mu, prob.p, side,
                            false, std::move(warnings));
}

template <class Coef>
SolutionTrajectory integrate_with_coef(const SingularProblem& prob, Coef coef,
                                       const OdeOptions& opt, std::vector<std::string> warnings,
                                       SolutionTrajectory::Side side) {
  if (!(prob.mu > 0)) fail_validation("mu must be positive");
  if (!(prob.p > 1)) fail_validation("p must exceed 1");
  if (!(prob.A > 0)) fail_validation("domain endpoint A must be positive");
  if (prob.H0 < 0) fail_validation("H(0) must be nonnegative");
  if (std::fabs(prob.d) > opt.rescale_threshold)
    return integrate_rescaled(prob, coef, opt, std::move(warnings), side);
  return integrate_direct(prob, coef, prob.mu, prob.mu, opt, std::move(warnings), side);
}

struct FamilyCoef {
  double half_sum;
  double half_diff;
  double operator()(double r) const {
    return (half_sum * std::cos(r) - half_diff) / std::sin(r);
  }
};

}  // namespace detail

/// Second-order series state at r_start: the launch used at the singular end.
/// w = d - mu g(d) r^2 / (2 (1 + H(0))), w' = -mu g(d) r / (1 + H(0)) with
/// g(t) = |t|^{p-1} t - t.  Truncation O(r^4) in w.
inline std::pair<double, double> series_start(const SingularProblem& prob, double r_start) {
  if (!(r_start > 0) || r_start > 1e-3 * prob.A)
    fail_validation("series_start: r_start must lie in (0, A/1000]");
  const double g = prob.mu * (odd_pow(prob.d, prob.p) - prob.d);
  const double c2 = detail::series_c2(prob.H0, g);
  return {prob.d + c2 * r_start * r_start, 2.0 * c2 * r_start};
}

inline void validate_tolerances(double atol, double rtol) {
  if (!(atol >= 1e-14 && atol <= 1e-4) || !(rtol >= 1e-14 && rtol <= 1e-4))
    fail_validation("tolerances must lie in [1e-14, 1e-4]");
}

/// Integrate a general singular problem with an adaptive embedded RK 5(4),
/// series launch, dense cubic-Hermite output and refined events.
inline SolutionTrajectory integrate(const SingularProblem& prob, const OdeOptions& opt) {
  validate_tolerances(opt.atol, opt.rtol);
  if (!prob.H) fail_validation("problem has no coefficient function H");
  auto H = prob.H;
  auto coef = [H](double r) { return H(r) / r; };
  return detail::integrate_with_coef(prob, coef, opt, {}, SolutionTrajectory::Side::generic);
}

inline SolutionTrajectory integrate(const SingularProblem& prob, double atol, double rtol) {
  return integrate(prob, OdeOptions{}.with_tol(atol, rtol));
}

namespace detail {

inline SingularProblem forward_problem(const IsoparametricFamily& fam, double mu, double p,
                                       double d) {
  SingularProblem prob;
  const double hs = 0.5 * (fam.m_minus + fam.m_plus);
  const double hd = 0.5 * (fam.m_plus - fam.m_minus);
  prob.H = [hs, hd](double r) { return (hs * std::cos(r) - hd) * r / std::sin(r); };
  prob.H0 = fam.m_minus;
  prob.Hp_bound = 2.0 * (fam.m_minus + fam.m_plus);
  prob.A = a0(fam);
  prob.mu = mu;
  prob.p = p;
  prob.d = d;
  return prob;
}

inline SingularProblem backward_problem(const IsoparametricFamily& fam, double mu, double p,
                                        double c) {
  SingularProblem prob;
  const double hs = 0.5 * (fam.m_minus + fam.m_plus);
  const double hd = 0.5 * (fam.m_plus - fam.m_minus);
  // reflected coefficient h~(r) = -h(pi - r) = hs cos r + hd
  prob.H = [hs, hd](double r) { return (hs * std::cos(r) + hd) * r / std::sin(r); };
  prob.H0 = fam.m_plus;
  prob.Hp_bound = 2.0 * (fam.m_minus + fam.m_plus);
  prob.A = kPi - a0(fam);
  prob.mu = mu;
  prob.p = p;
  prob.d = c;
  return prob;
}

inline std::vector<std::string> admissibility_warnings(const IsoparametricFamily& fam, double p) {
  std::vector<std::string> w;
  const AdmissibleRange range = admissible_p(fam);
  if (!range.contains(p))
    w.push_back("p=" + std::to_string(p) + " outside the admissible range of family " +
                fam.str());
  return w;
}

}  // namespace detail

/// Forward problem of a family on [0, a0]: H(r) = h(r) r / sin r, H(0) = m-.
inline SolutionTrajectory solve_forward(const IsoparametricFamily& fam, double mu, double p,
                                        double d, const OdeOptions& opt) {
  validate_tolerances(opt.atol, opt.rtol);
  const SingularProblem prob = detail::forward_problem(fam, mu, p, d);
  const detail::FamilyCoef coef{0.5 * (fam.m_minus + fam.m_plus),
                                0.5 * (fam.m_plus - fam.m_minus)};
  return detail::integrate_with_coef(prob, coef, opt, detail::admissibility_warnings(fam, p),
                                     SolutionTrajectory::Side::forward);
}

inline SolutionTrajectory solve_forward(const IsoparametricFamily& fam, double mu, double p,
                                        double d, double atol, double rtol) {
  return solve_forward(fam, mu, p, d, OdeOptions{}.with_tol(atol, rtol));
}

/// Backward problem of a family, returned on [a0, pi] after reflection:
/// w(pi) = c, w'(pi) = 0, and w solves the original equation there.
inline SolutionTrajectory solve_backward(const IsoparametricFamily& fam, double mu, double p,
                                         double c, const OdeOptions& opt) {
  validate_tolerances(opt.atol, opt.rtol);
  const SingularProblem prob = detail::backward_problem(fam, mu, p, c);
  const detail::FamilyCoef refl{0.5 * (fam.m_minus + fam.m_plus),
                                -0.5 * (fam.m_plus - fam.m_minus)};
  SolutionTrajectory omega = detail::integrate_with_coef(
      prob, refl, opt, detail::admissibility_warnings(fam, p), SolutionTrajectory::Side::backward);

  // reflect r -> pi - r; w even, w' odd, w'' even under the reflection
  std::vector<TrajectoryNode> nodes(omega.nodes().size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TrajectoryNode& n = omega.nodes()[omega.nodes().size() - 1 - i];
    nodes[i] = {kPi - n.r, n.w, -n.wp, n.wpp};
  }
  std::vector<double> zeros(omega.zeros().size()), criticals(omega.criticals().size());
  for (std::size_t i = 0; i < zeros.size(); ++i)
    zeros[i] = kPi - omega.zeros()[omega.zeros().size() - 1 - i];
  for (std::size_t i = 0; i < criticals.size(); ++i)
    criticals[i] = kPi - omega.criticals()[omega.criticals().size() - 1 - i];

  const detail::FamilyCoef coef{0.5 * (fam.m_minus + fam.m_plus),
                                0.5 * (fam.m_plus - fam.m_minus)};
  return SolutionTrajectory(std::move(nodes), std::move(zeros), std::move(criticals), prob,
                            std::function<double(double)>(coef), mu, mu, p,
                            SolutionTrajectory::Side::backward, omega.degenerate_constant(),
                            omega.warnings());
}

inline SolutionTrajectory solve_backward(const IsoparametricFamily& fam, double mu, double p,
                                         double c, double atol, double rtol) {
  return solve_backward(fam, mu, p, c, OdeOptions{}.with_tol(atol, rtol));
}

}  // namespace nodal
