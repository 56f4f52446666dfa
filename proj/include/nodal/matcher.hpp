#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nodal/common.hpp"
#include "nodal/family.hpp"
#include "nodal/ivp.hpp"
#include "nodal/shooting.hpp"

namespace nodal {

struct MatchVector {
  double dw = 0.0;
  double dwp = 0.0;
  double norm = 0.0;
};

/// I(d) - J(c) and its Euclidean norm.
inline MatchVector match_residual(const IsoparametricFamily& fam, double mu, double p, double d,
                                  double c, const OdeOptions& opt = {}) {
  const PhasePoint i = I_map(fam, mu, p, d, opt);
  const PhasePoint j = J_map(fam, mu, p, c, opt);
  MatchVector v;
  v.dw = i.w - j.w;
  v.dwp = i.wp - j.wp;
  v.norm = std::hypot(v.dw, v.dwp);
  return v;
}

struct MatchOptions {
  OdeOptions ode = OdeOptions{}.with_tol(1e-12, 1e-12);
  double tol_match = 1e-8;  // accepted residual: tol_match * (1 + radius)
  int max_iterations = 200;
  double fd_step = 1e-6;
};

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
};

struct FindMatchResult {
  double d = 0.0;
  double c = 0.0;
  double residual = 0.0;
  double radius = 0.0;
  int iterations = 0;
};

/// A glued solution of the two-sided problem on [0, pi]: forward trajectory
/// on [0, a0], backward trajectory on [a0, pi], merged events, and the
/// residual |I(d) - J(c)| of the glue.
struct MatchedSolution {
  double d = 0.0;
  double c = 0.0;
  SolutionTrajectory forward;
  SolutionTrajectory backward;
  double match_residual = 0.0;
  double radius = 0.0;
  std::vector<double> zeros;      // in [0, pi]
  std::vector<double> criticals;  // includes the endpoints 0 and pi
  long k_zeros = 0;
  bool degenerate_constant = false;
  int shift = 0;             // angle-plane shift that certified the match
  std::string certificate;   // how the match was found
  std::vector<std::pair<double, double>> alternates;  // other (d, c) pairs found

  double a0() const { return forward.r_end(); }
  double eval_w(double r) const {
    return r <= forward.r_end() ? forward.eval_w(r) : backward.eval_w(r);
  }
  double eval_wp(double r) const {
    return r <= forward.r_end() ? forward.eval_wp(r) : backward.eval_wp(r);
  }
};

namespace detail {

struct PhasePair {
  PhasePoint i, j;
  double radius() const { return std::max(i.radius(), j.radius()); }
  MatchVector diff() const {
    MatchVector v;
    v.dw = i.w - j.w;
    v.dwp = i.wp - j.wp;
    v.norm = std::hypot(v.dw, v.dwp);
    return v;
  }
};

}  // namespace detail

/// Solve I(d) = J(c) inside the given brackets, starting from (d0, c0).
/// Damped quasi-Newton (finite-difference Jacobian, Broyden updates) with a
/// nested-bisection fallback along the bracketing segments.
inline FindMatchResult find_match(const IsoparametricFamily& fam, double mu, double p,
                                  Bracket d_bracket, Bracket c_bracket, double d0, double c0,
                                  const MatchOptions& opt = {}) {
  if (!(d_bracket.lo <= d0 && d0 <= d_bracket.hi) ||
      !(std::min(c_bracket.lo, c_bracket.hi) <= c0 && c0 <= std::max(c_bracket.lo, c_bracket.hi)))
    fail_validation("find_match: seed outside bracket");

  auto eval_pair = [&](double d, double c) {
    detail::PhasePair pp;
    pp.i = I_map(fam, mu, p, d, opt.ode);
    pp.j = J_map(fam, mu, p, c, opt.ode);
    return pp;
  };

  // search box: brackets with half-width margin
  const double dw = d_bracket.hi - d_bracket.lo, cw = std::fabs(c_bracket.hi - c_bracket.lo);
  const double dlo = d_bracket.lo - 0.5 * dw, dhi = d_bracket.hi + 0.5 * dw;
  const double clo = std::min(c_bracket.lo, c_bracket.hi) - 0.5 * cw;
  const double chi = std::max(c_bracket.lo, c_bracket.hi) + 0.5 * cw;

  double d = d0, c = c0;
  detail::PhasePair pp = eval_pair(d, c);
  MatchVector f = pp.diff();
  double best_norm = f.norm;
  int used = 0;

  auto converged = [&]() { return f.norm <= opt.tol_match * (1.0 + pp.radius()); };

  // FD Jacobian of F(d, c) = I(d) - J(c)
  double J11 = 0, J12 = 0, J21 = 0, J22 = 0;
  auto refresh_jacobian = [&]() {
    const double hd = opt.fd_step * std::max(1.0, std::fabs(d));
    const double hc = opt.fd_step * std::max(1.0, std::fabs(c));
    const PhasePoint ip = I_map(fam, mu, p, d + hd, opt.ode);
    const PhasePoint im = I_map(fam, mu, p, d - hd, opt.ode);
    const PhasePoint jp = J_map(fam, mu, p, c + hc, opt.ode);
    const PhasePoint jm = J_map(fam, mu, p, c - hc, opt.ode);
    J11 = (ip.w - im.w) / (2 * hd);
    J21 = (ip.wp - im.wp) / (2 * hd);
    J12 = -(jp.w - jm.w) / (2 * hc);
    J22 = -(jp.wp - jm.wp) / (2 * hc);
  };

  bool have_jacobian = false;
  int since_refresh = 0;
  int stagnation = 0;
  bool tried_fallback = false;

  while (used < opt.max_iterations) {
    if (converged()) {
      FindMatchResult out;
      out.d = d;
      out.c = c;
      out.residual = f.norm;
      out.radius = pp.radius();
      out.iterations = used;
      return out;
    }
    ++used;
    if (!have_jacobian || since_refresh >= 8) {
      refresh_jacobian();
      have_jacobian = true;
      since_refresh = 0;
    }
    const double det = J11 * J22 - J12 * J21;
    if (std::fabs(det) < 1e-300) {
      refresh_jacobian();
      since_refresh = 0;
      ++stagnation;
      if (stagnation > 3) break;
      continue;
    }
    const double sd = -(J22 * f.dw - J12 * f.dwp) / det;
    const double sc = -(-J21 * f.dw + J11 * f.dwp) / det;

    double lambda = 1.0;
    bool improved = false;
    for (int half = 0; half < 8; ++half, lambda *= 0.5) {
      const double dn = std::clamp(d + lambda * sd, dlo, dhi);
      const double cn = std::clamp(c + lambda * sc, clo, chi);
      const detail::PhasePair ppn = eval_pair(dn, cn);
      const MatchVector fn = ppn.diff();
      if (fn.norm < f.norm * (1.0 - 0.25 * lambda) || fn.norm < opt.tol_match) {
        // Broyden update with the accepted step
        const double pd = dn - d, pc = cn - c;
        const double pp2 = pd * pd + pc * pc;
        if (pp2 > 0) {
          const double y1 = fn.dw - f.dw, y2 = fn.dwp - f.dwp;
          const double r1 = y1 - (J11 * pd + J12 * pc);
          const double r2 = y2 - (J21 * pd + J22 * pc);
          J11 += r1 * pd / pp2;
          J12 += r1 * pc / pp2;
          J21 += r2 * pd / pp2;
          J22 += r2 * pc / pp2;
        }
        d = dn;
        c = cn;
        pp = ppn;
        f = fn;
        improved = true;
        ++since_refresh;
        break;
      }
    }
    if (improved) {
      best_norm = std::min(best_norm, f.norm);
      stagnation = 0;
      continue;
    }
    ++stagnation;
    if (stagnation == 1) {
      refresh_jacobian();
      since_refresh = 0;
      continue;
    }
    if (tried_fallback) break;
    tried_fallback = true;
    stagnation = 0;

    // Fallback: bisection along the bracketing segments.  For fixed d the
    // angle mismatch phi(c) = turn from J(c) to I(d) is bracketed in c; the
    // radius gap along the resulting path is bracketed in d.
    auto c_of_d = [&](double dd, const PhasePoint& i_dd) -> std::optional<double> {
      auto phi = [&](double cc) {
        return angle_between(J_map(fam, mu, p, cc, opt.ode), i_dd);
      };
      double a = c_bracket.lo, b = c_bracket.hi;
      if (a > b) std::swap(a, b);
      double fa = phi(a), fb = phi(b);
      if (fa == 0.0) return a;
      if (fb == 0.0) return b;
      if (fa * fb > 0.0) return std::nullopt;
      return detail::refine_root(phi, a, b, fa, fb, 1e-12 * std::max(1.0, b));
    };
    auto gap = [&](double dd) -> std::optional<double> {
      const PhasePoint i_dd = I_map(fam, mu, p, dd, opt.ode);
      const auto cc = c_of_d(dd, i_dd);
      if (!cc) return std::nullopt;
      return i_dd.radius() - J_map(fam, mu, p, *cc, opt.ode).radius();
    };
    const auto glo = gap(d_bracket.lo), ghi = gap(d_bracket.hi);
    if (!glo || !ghi)
      fail_validation("find_match: no angle sign change in the c bracket");
    if (*glo * *ghi > 0.0)
      fail_validation("find_match: no radius sign change in the d bracket");
    auto gap_val = [&](double dd) { return gap(dd).value_or(0.0); };
    const double droot = detail::refine_root(gap_val, d_bracket.lo, d_bracket.hi, *glo, *ghi,
                                             1e-11 * std::max(1.0, d_bracket.hi));
    const PhasePoint iroot = I_map(fam, mu, p, droot, opt.ode);
    const auto croot = c_of_d(droot, iroot);
    if (!croot) fail_validation("find_match: fallback lost the c bracket");
    d = droot;
    c = *croot;
    pp = eval_pair(d, c);
    f = pp.diff();
    have_jacobian = false;
  }
  if (converged()) {
    FindMatchResult out;
    out.d = d;
    out.c = c;
    out.residual = f.norm;
    out.radius = pp.radius();
    out.iterations = used;
    return out;
  }
  fail_numerical("find_match: stagnation after " + std::to_string(used) +
                 " iterations; best residual " + std::to_string(best_norm));
}

/// Glue a forward and a backward trajectory into one solution on [0, pi].
/// The matching point a0 is appended to the critical (resp. zero) list when
/// |w'(a0)| (resp. |w(a0)|) is below tolerance.
inline MatchedSolution assemble(double d, double c, SolutionTrajectory forward,
                                SolutionTrajectory backward, double tol_match = 1e-8) {
  if (forward.side() != SolutionTrajectory::Side::forward)
    fail_validation("assemble: first trajectory is not a forward solution");
  if (backward.side() != SolutionTrajectory::Side::backward)
    fail_validation("assemble: second trajectory is not a backward solution");
  if (std::fabs(forward.r_end() - backward.r_begin()) > 1e-12)
    fail_validation("assemble: trajectories do not meet at the matching point");

  MatchedSolution m;
  m.d = d;
  m.c = c;
  const auto& fe = forward.nodes().back();
  const auto& bs = backward.nodes().front();
  m.match_residual = std::hypot(fe.w - bs.w, fe.wp - bs.wp);
  m.radius = std::max(std::hypot(fe.w, fe.wp), std::hypot(bs.w, bs.wp));
  if (m.match_residual > tol_match * (1.0 + m.radius))
    fail_validation("assemble: match residual " + std::to_string(m.match_residual) +
                    " above tolerance");

  m.degenerate_constant = forward.degenerate_constant() && backward.degenerate_constant();
  const double a0r = forward.r_end();
  const double tol_event = 10.0 * tol_match * (1.0 + m.radius);

  auto push_unique = [](std::vector<double>& v, double x) {
    if (v.empty() || x - v.back() > 1e-9) v.push_back(x);
  };
  if (!m.degenerate_constant) {
    for (double z : forward.zeros()) push_unique(m.zeros, z);
    if (std::fabs(0.5 * (fe.w + bs.w)) <= tol_event) push_unique(m.zeros, a0r);
    for (double z : backward.zeros()) push_unique(m.zeros, z);

    push_unique(m.criticals, 0.0);
    for (double x : forward.criticals()) push_unique(m.criticals, x);
    if (std::fabs(0.5 * (fe.wp + bs.wp)) <= tol_event) push_unique(m.criticals, a0r);
    for (double x : backward.criticals()) push_unique(m.criticals, x);
    push_unique(m.criticals, kPi);
  }
  m.k_zeros = static_cast<long>(m.zeros.size());
  m.forward = std::move(forward);
  m.backward = std::move(backward);
  return m;
}

namespace detail {

struct Seed {
  double d0 = 0.0, c0 = 0.0;
  Bracket d_bracket, c_bracket;
};

// Intersections of the forward curve R = (theta, rho) with the backward
// curve S shifted left by sigma*pi, as segment-segment crossings of the
// sampled polylines.
inline std::vector<Seed> polyline_intersections(const SpiralCurve& fwd, const SpiralCurve& bwd,
                                                int sigma) {
  std::vector<Seed> seeds;
  const double shift = sigma * kPi;
  for (std::size_t a = 0; a + 1 < fwd.samples.size(); ++a) {
    const double ax1 = fwd.samples[a].angle, ay1 = fwd.samples[a].radius;
    const double ax2 = fwd.samples[a + 1].angle, ay2 = fwd.samples[a + 1].radius;
    const double alox = std::min(ax1, ax2), ahix = std::max(ax1, ax2);
    const double aloy = std::min(ay1, ay2), ahiy = std::max(ay1, ay2);
    for (std::size_t b = 0; b + 1 < bwd.samples.size(); ++b) {
      const double bx1 = bwd.samples[b].angle - shift, by1 = bwd.samples[b].radius;
      const double bx2 = bwd.samples[b + 1].angle - shift, by2 = bwd.samples[b + 1].radius;
      if (std::max(bx1, bx2) < alox || std::min(bx1, bx2) > ahix) continue;
      if (std::max(by1, by2) < aloy || std::min(by1, by2) > ahiy) continue;
      // solve A1 + s (A2-A1) = B1 + t (B2-B1)
      const double rx = ax2 - ax1, ry = ay2 - ay1;
      const double sx = bx2 - bx1, sy = by2 - by1;
      const double det = rx * sy - ry * sx;
      if (std::fabs(det) < 1e-14) continue;
      const double qx = bx1 - ax1, qy = by1 - ay1;
      const double s = (qx * sy - qy * sx) / det;
      const double t = (qx * ry - qy * rx) / det;
      if (s < -1e-9 || s > 1 + 1e-9 || t < -1e-9 || t > 1 + 1e-9) continue;
      Seed seed;
      seed.d_bracket = {fwd.samples[a].param, fwd.samples[a + 1].param};
      seed.c_bracket = {bwd.samples[b].param, bwd.samples[b + 1].param};
      seed.d0 = fwd.samples[a].param +
                std::clamp(s, 0.0, 1.0) * (fwd.samples[a + 1].param - fwd.samples[a].param);
      seed.c0 = bwd.samples[b].param +
                std::clamp(t, 0.0, 1.0) * (bwd.samples[b + 1].param - bwd.samples[b].param);
      seeds.push_back(seed);
    }
  }
  std::sort(seeds.begin(), seeds.end(),
            [](const Seed& x, const Seed& y) { return x.d0 + x.c0 < y.d0 + y.c0; });
  return seeds;
}

inline bool near_constant(double x) {
  return std::fabs(x) < 1e-4 || std::fabs(std::fabs(x) - 1.0) < 1e-4;
}

}  // namespace detail

/// Find a glued solution with at least k zeros in [0, pi].  Scans both
/// spirals up to the parameter budget, intersects the forward curve with the
/// shifted backward curve in the (angle, radius) plane for increasing shift,
/// polishes every candidate crossing and returns the match with the smallest
/// |d| + |c| (others are reported in `alternates`).
inline MatchedSolution solve_for_k(const IsoparametricFamily& fam, double mu, double p, long k,
                                   double budget = 1e3, const MatchOptions& opt = {}) {
  if (k < 0) fail_validation("solve_for_k: k must be nonnegative");
  if (!admissible_p(fam).contains(p))
    fail_validation("solve_for_k: p outside the admissible range of family " + fam.str());

  if (k == 0) {
    auto fwd = solve_forward(fam, mu, p, 1.0, opt.ode);
    auto bwd = solve_backward(fam, mu, p, 1.0, opt.ode);
    MatchedSolution m = assemble(1.0, 1.0, std::move(fwd), std::move(bwd), opt.tol_match);
    m.certificate = "constant solution d=c=1";
    return m;
  }

  const int sigma0 = static_cast<int>(std::max<long>(k, 1));
  ScanOptions scan_opt;
  std::string progress;

  for (double depth = 64.0;; depth = std::min(depth * 2.0, budget)) {
    const auto fwd_curve = scan_spiral(SpiralSide::forward, 1.0, depth, fam, mu, p, scan_opt);
    const auto bwd_curve = scan_spiral(SpiralSide::backward, 1.0, depth, fam, mu, p, scan_opt);
    const int fwd_deep =
        fwd_curve.crossings.empty() ? 0 : fwd_curve.crossings.back().index;
    const int bwd_deep =
        bwd_curve.crossings.empty() ? 0 : bwd_curve.crossings.back().index;
    progress = "depth=" + std::to_string(depth) +
               " forward crossings=" + std::to_string(fwd_deep) +
               " backward crossings=" + std::to_string(bwd_deep);

    if (fwd_deep >= sigma0 && bwd_deep >= sigma0) {
      for (int sigma = sigma0; sigma <= sigma0 + 2; ++sigma) {
        const auto seeds = detail::polyline_intersections(fwd_curve, bwd_curve, sigma);
        std::vector<MatchedSolution> found;
        for (const auto& seed : seeds) {
          const double csign = (sigma % 2 == 1) ? -1.0 : 1.0;
          FindMatchResult res;
          try {
            Bracket cb{csign * seed.c_bracket.lo, csign * seed.c_bracket.hi};
            res = find_match(fam, mu, p, seed.d_bracket, cb, seed.d0, csign * seed.c0, opt);
          } catch (const error&) {
            continue;
          }
          if (detail::near_constant(res.d) && detail::near_constant(res.c)) continue;
          auto fwd = solve_forward(fam, mu, p, res.d, opt.ode);
          auto bwd = solve_backward(fam, mu, p, res.c, opt.ode);
          MatchedSolution m;
          try {
            m = assemble(res.d, res.c, std::move(fwd), std::move(bwd), opt.tol_match);
          } catch (const error&) {
            continue;
          }
          if (m.k_zeros < k) continue;
          m.shift = sigma;
          m.certificate = "sigma=" + std::to_string(sigma) + " seed=(" +
                          std::to_string(seed.d0) + "," + std::to_string(csign * seed.c0) +
                          ") " + progress;
          found.push_back(std::move(m));
        }
        if (!found.empty()) {
          std::sort(found.begin(), found.end(),
                    [](const MatchedSolution& a, const MatchedSolution& b) {
                      return std::fabs(a.d) + std::fabs(a.c) < std::fabs(b.d) + std::fabs(b.c);
                    });
          MatchedSolution best = std::move(found.front());
          for (std::size_t i = 1; i < found.size(); ++i)
            best.alternates.emplace_back(found[i].d, found[i].c);
          return best;
        }
      }
    }
    if (depth >= budget)
      fail_budget("solve_for_k: parameter budget " + std::to_string(budget) +
                  " exhausted before a match with " + std::to_string(k) + " zeros (" + progress +
                  ")");
  }
}

}  // namespace nodal
