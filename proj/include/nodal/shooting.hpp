#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <vector>

#include "nodal/common.hpp"
#include "nodal/family.hpp"
#include "nodal/ivp.hpp"

namespace nodal {

struct PhasePoint {
  double w = 0.0;
  double wp = 0.0;
  double radius() const { return std::hypot(w, wp); }
};

/// Endpoint state (w(a0), w'(a0)) of the forward problem.
inline PhasePoint I_map(const IsoparametricFamily& fam, double mu, double p, double d,
                        const OdeOptions& opt = {}) {
  const auto traj = solve_forward(fam, mu, p, d, opt);
  return {traj.nodes().back().w, traj.nodes().back().wp};
}

/// Endpoint state (w(a0), w'(a0)) of the backward problem.
inline PhasePoint J_map(const IsoparametricFamily& fam, double mu, double p, double c,
                        const OdeOptions& opt = {}) {
  const auto traj = solve_backward(fam, mu, p, c, opt);
  return {traj.nodes().front().w, traj.nodes().front().wp};
}

/// Signed turn from a to b, in (-pi, pi].
inline double angle_between(const PhasePoint& a, const PhasePoint& b) {
  return std::atan2(a.w * b.wp - a.wp * b.w, a.w * b.w + a.wp * b.wp);
}

/// Zero count before the matching point from the unwrapped forward angle:
/// n = -floor((theta - pi/2)/pi) - 1.  Long double keeps the floor stable
/// next to exact multiples of pi.
inline long zero_count_from_angle(double theta) {
  const long double x = (static_cast<long double>(theta) - kPiL / 2) / kPiL;
  return static_cast<long>(-std::floor(x)) - 1;
}

/// Zero count after the matching point from the unwrapped backward angle.
inline long N_from_angle(double vartheta) {
  const long double x = (-static_cast<long double>(vartheta) - kPiL / 2) / kPiL;
  return static_cast<long>(-std::floor(x)) - 1;
}

/// The negative-parameter branch: theta(-d) = theta(d) - pi.
inline double negative_branch_angle(double theta_positive) { return theta_positive - kPi; }

enum class SpiralSide { forward, backward };

struct SpiralSample {
  double param = 0.0;
  double w = 0.0;
  double wp = 0.0;
  double angle = 0.0;   // unwrapped, anchored at param = 1
  double radius = 0.0;
  long zero_count = 0;  // events strictly inside the half interval
};

/// Parameters where the curve crosses angle = -index*pi (forward side) or
/// +index*pi (backward side); first/last crossing within the scanned range.
struct SpiralCrossing {
  int index = 0;
  double param_first = 0.0;
  double param_last = 0.0;
  double radius_first = 0.0;
  double radius_last = 0.0;
};

struct SpiralCurve {
  SpiralSide side = SpiralSide::forward;
  double from = 0.0, to = 0.0;
  std::vector<SpiralSample> samples;      // sorted by param, |dangle| < pi/2
  std::vector<SpiralCrossing> crossings;  // ascending index

  const SpiralCrossing* crossing(int index) const {
    for (const auto& c : crossings)
      if (c.index == index) return &c;
    return nullptr;
  }
};

struct ScanOptions {
  OdeOptions ode = OdeOptions{}.with_tol(1e-9, 1e-9);
  std::size_t max_samples = 1'000'000;
  int initial_points = 33;
  double max_angle_step = kPi / 2;
  double crossing_param_tol = 1e-9;
};

struct PhaseSample {
  double param = 0.0;
  PhasePoint point;
  double angle = 0.0;
};

/// Assign continuous angles along a phase curve, anchored at param=1 where
/// the curve sits at (1,0).  Samples must be sorted by param and contain the
/// anchor; refinement inserts parameters until adjacent turns are below
/// max_angle_step.
inline void unwrap_angles(std::vector<PhaseSample>& samples,
                          const std::function<PhasePoint(double)>& eval, double max_angle_step,
                          std::size_t max_samples) {
  if (samples.empty()) fail_validation("unwrap_angles: no samples");
  for (std::size_t i = 0; i + 1 < samples.size(); ++i)
    if (!(samples[i].param < samples[i + 1].param))
      fail_validation("unwrap_angles: samples must be strictly increasing in param");

  for (const auto& s : samples)
    if (s.point.radius() <= 1e-12)
      fail_numerical("unwrap_angles: phase point at the origin for param=" +
                     std::to_string(s.param));

  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<PhaseSample> next;
    next.reserve(samples.size() * 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      next.push_back(samples[i]);
      if (i + 1 == samples.size()) break;
      if (std::fabs(angle_between(samples[i].point, samples[i + 1].point)) >= max_angle_step) {
        const double mid = 0.5 * (samples[i].param + samples[i + 1].param);
        PhaseSample s;
        s.param = mid;
        s.point = eval(mid);
        if (s.point.radius() <= 1e-12)
          fail_numerical("unwrap_angles: phase point at the origin for param=" +
                         std::to_string(mid));
        next.push_back(s);
        changed = true;
        if (next.size() + (samples.size() - i) > max_samples)
          fail_budget("unwrap_angles: refinement budget exhausted (" +
                      std::to_string(max_samples) + " samples)");
      }
    }
    samples.swap(next);
  }

  auto anchor = std::find_if(samples.begin(), samples.end(),
                             [](const PhaseSample& s) { return s.param == 1.0; });
  if (anchor == samples.end()) fail_validation("unwrap_angles: anchor param=1 missing");
  const std::size_t i0 = static_cast<std::size_t>(anchor - samples.begin());
  samples[i0].angle = angle_between(PhasePoint{1.0, 0.0}, samples[i0].point);
  for (std::size_t i = i0; i + 1 < samples.size(); ++i)
    samples[i + 1].angle =
        samples[i].angle + angle_between(samples[i].point, samples[i + 1].point);
  for (std::size_t i = i0; i > 0; --i)
    samples[i - 1].angle =
        samples[i].angle - angle_between(samples[i - 1].point, samples[i].point);
}

namespace detail {

struct SpiralEval {
  const IsoparametricFamily* fam;
  double mu, p;
  SpiralSide side;
  const OdeOptions* ode;

  SpiralSample operator()(double param) const {
    SpiralSample s;
    s.param = param;
    if (side == SpiralSide::forward) {
      const auto traj = solve_forward(*fam, mu, p, param, *ode);
      s.w = traj.nodes().back().w;
      s.wp = traj.nodes().back().wp;
      long n = 0;
      for (double z : traj.zeros())
        if (z < traj.r_end()) ++n;
      s.zero_count = n;
    } else {
      const auto traj = solve_backward(*fam, mu, p, param, *ode);
      s.w = traj.nodes().front().w;
      s.wp = traj.nodes().front().wp;
      long n = 0;
      for (double z : traj.zeros())
        if (z > traj.r_begin()) ++n;
      s.zero_count = n;
    }
    s.radius = std::hypot(s.w, s.wp);
    return s;
  }
};

// Bisect a crossing of angle = target between two unwrapped neighbours.
// Angles of trial points are unwrapped locally against the nearer bracket
// endpoint, which stays valid because brackets only shrink.
inline SpiralSample bisect_crossing(const SpiralEval& eval, SpiralSample lo, SpiralSample hi,
                                    double target, double param_tol) {
  auto turn = [](const SpiralSample& a, const SpiralSample& b) {
    return angle_between(PhasePoint{a.w, a.wp}, PhasePoint{b.w, b.wp});
  };
  for (int it = 0; it < 200 && (hi.param - lo.param) > param_tol * std::max(1.0, lo.param);
       ++it) {
    SpiralSample mid = eval(0.5 * (lo.param + hi.param));
    mid.angle = lo.angle + turn(lo, mid);
    if ((lo.angle - target) * (mid.angle - target) <= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  SpiralSample best = (std::fabs(lo.angle - target) < std::fabs(hi.angle - target)) ? lo : hi;
  return best;
}

}  // namespace detail

/// Unwrapped angle at an arbitrary parameter inside a scanned range: the
/// phase point is unwrapped against the nearest curve sample, valid while
/// the true turn from that sample stays below pi.
inline double angle_at(const SpiralCurve& curve, double param, const PhasePoint& pt) {
  if (curve.samples.empty()) fail_validation("angle_at: empty curve");
  auto it = std::lower_bound(curve.samples.begin(), curve.samples.end(), param,
                             [](const SpiralSample& s, double x) { return s.param < x; });
  if (it == curve.samples.end()) --it;
  if (it != curve.samples.begin()) {
    auto prev = std::prev(it);
    if (std::fabs(prev->param - param) < std::fabs(it->param - param)) it = prev;
  }
  return it->angle + angle_between(PhasePoint{it->w, it->wp}, pt);
}

/// Sample one phase curve over [from, to] (positive parameters), unwrap its
/// angle anchored at param=1, and locate the extreme parameters where the
/// angle crosses integer multiples of pi within the scanned range.
inline SpiralCurve scan_spiral(SpiralSide side, double from, double to,
                               const IsoparametricFamily& fam, double mu, double p,
                               const ScanOptions& opt = {}) {
  if (!(from > 0) || !(to > from)) fail_validation("scan_spiral: need 0 < from < to");

  const detail::SpiralEval eval{&fam, mu, p, side, &opt.ode};

  // working grid: geometric over the range, extended to include the anchor
  std::vector<double> params;
  const double lo = std::min(from, 1.0), hi = std::max(to, 1.0);
  const int n0 = std::max(2, opt.initial_points);
  for (int i = 0; i < n0; ++i)
    params.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n0 - 1)));
  params.push_back(1.0);
  params.push_back(from);
  params.push_back(to);
  std::sort(params.begin(), params.end());
  params.erase(std::unique(params.begin(), params.end(),
                           [](double a, double b) { return std::fabs(a - b) < 1e-14; }),
               params.end());

  std::map<double, SpiralSample> cache;
  auto sample_at = [&](double d) -> SpiralSample {
    auto it = cache.find(d);
    if (it != cache.end()) return it->second;
    SpiralSample s = eval(d);
    cache.emplace(d, s);
    return s;
  };

  std::vector<PhaseSample> phases;
  phases.reserve(params.size());
  for (double d : params) {
    const SpiralSample s = sample_at(d);
    phases.push_back({d, PhasePoint{s.w, s.wp}, 0.0});
  }
  unwrap_angles(
      phases,
      [&](double d) {
        const SpiralSample s = sample_at(d);
        return PhasePoint{s.w, s.wp};
      },
      opt.max_angle_step, opt.max_samples);

  SpiralCurve curve;
  curve.side = side;
  curve.from = from;
  curve.to = to;
  for (const auto& ph : phases) {
    if (ph.param < from - 1e-14 || ph.param > to + 1e-14) continue;
    SpiralSample s = sample_at(ph.param);
    s.angle = ph.angle;
    curve.samples.push_back(s);
  }

  // crossings of angle = -i*pi (forward) / +i*pi (backward) within the range
  const double sign = (side == SpiralSide::forward) ? -1.0 : 1.0;
  double extreme = 0.0;
  for (const auto& s : curve.samples) extreme = std::max(extreme, sign * s.angle);
  for (int i = 1; i * kPi <= extreme + 1e-9; ++i) {
    const double target = sign * i * kPi;
    SpiralCrossing cross;
    cross.index = i;
    bool found = false;
    for (std::size_t j = 0; j + 1 < curve.samples.size(); ++j) {
      const auto &a = curve.samples[j], &b = curve.samples[j + 1];
      if ((a.angle - target) * (b.angle - target) > 0.0) continue;
      const SpiralSample root =
          detail::bisect_crossing(eval, a, b, target, opt.crossing_param_tol);
      if (!found || root.param < cross.param_first) {
        cross.param_first = root.param;
        cross.radius_first = root.radius;
      }
      if (!found || root.param > cross.param_last) {
        cross.param_last = root.param;
        cross.radius_last = root.radius;
      }
      found = true;
    }
    if (found) curve.crossings.push_back(cross);
  }
  return curve;
}

}  // namespace nodal
