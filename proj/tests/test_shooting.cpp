#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nodal/shooting.hpp"

using namespace nodal;

TEST_CASE("I_map fixed points and oddness") {
  const auto fam = make_family(1, 2, 2);
  const auto i1 = I_map(fam, 1.0, 3.0, 1.0);
  CHECK(i1.w == 1.0);
  CHECK(i1.wp == 0.0);

  const auto i0 = I_map(fam, 1.0, 3.0, 0.0);
  CHECK(i0.w == 0.0);
  CHECK(i0.wp == 0.0);

  const auto ip = I_map(fam, 1.0, 3.0, 2.0);
  const auto im = I_map(fam, 1.0, 3.0, -2.0);
  CHECK(std::fabs(ip.w + im.w) < 1e-10);
  CHECK(std::fabs(ip.wp + im.wp) < 1e-10);
  CHECK(ip.radius() > 1e-12);
}

TEST_CASE("J_map fixed points and the mirror identity for equal multiplicities") {
  const auto fam = make_family(1, 2, 2);
  const auto j1 = J_map(fam, 1.0, 3.0, 1.0);
  CHECK(j1.w == 1.0);
  CHECK(j1.wp == 0.0);

  const auto j0 = J_map(fam, 1.0, 3.0, 0.0);
  CHECK(j0.w == 0.0);
  CHECK(j0.wp == 0.0);

  for (double c : {2.0, 5.0, 11.0}) {
    const auto i = I_map(fam, 1.0, 3.0, c);
    const auto j = J_map(fam, 1.0, 3.0, c);
    CHECK(std::fabs(j.w - i.w) < 1e-9);
    CHECK(std::fabs(j.wp + i.wp) < 1e-9);
  }
}

TEST_CASE("zero count formula values") {
  CHECK(zero_count_from_angle(0.0) == 0);
  CHECK(zero_count_from_angle(-3 * kPi / 4) == 1);
  CHECK(zero_count_from_angle(0.4) == 0);
  CHECK(zero_count_from_angle(-kPi) == 1);
  CHECK(zero_count_from_angle(-2 * kPi) == 2);
  CHECK(N_from_angle(0.0) == 0);
  CHECK(N_from_angle(3 * kPi / 4) == 1);
  CHECK(N_from_angle(kPi) == 1);
}

TEST_CASE("negative branch angle") {
  CHECK(negative_branch_angle(0.0) == -kPi);  // theta(-1) = -pi
}

TEST_CASE("unwrap of a constant curve is identically zero") {
  std::vector<PhaseSample> samples;
  for (double d : {0.5, 1.0, 2.0, 3.0}) samples.push_back({d, PhasePoint{1.0, 0.0}, 0.0});
  unwrap_angles(
      samples, [](double) { return PhasePoint{1.0, 0.0}; }, kPi / 2, 1000);
  for (const auto& s : samples) CHECK(s.angle == 0.0);
}

TEST_CASE("unwrap budget exhaustion is reported") {
  // antipodal neighbours refine forever when the eval oscillates
  std::vector<PhaseSample> samples{{0.5, PhasePoint{1.0, 0.0}, 0.0},
                                   {1.0, PhasePoint{-1.0, 0.0}, 0.0}};
  int flip = 0;
  auto eval = [&flip](double) {
    return (flip++ % 2) ? PhasePoint{1.0, 0.0} : PhasePoint{-1.0, 0.0};
  };
  CHECK_THROWS_AS(unwrap_angles(samples, eval, kPi / 2, 64), error);
}

TEST_CASE("forward spiral on [1,200]: anchoring, bounds, turning") {
  const auto fam = make_family(1, 2, 2);
  const auto curve = scan_spiral(SpiralSide::forward, 1.0, 200.0, fam, 1.0, 3.0);

  REQUIRE_FALSE(curve.samples.empty());
  CHECK(curve.samples.front().param == 1.0);
  CHECK(curve.samples.front().angle == 0.0);

  for (std::size_t i = 0; i + 1 < curve.samples.size(); ++i) {
    CHECK(curve.samples[i].param < curve.samples[i + 1].param);
    CHECK(std::fabs(curve.samples[i + 1].angle - curve.samples[i].angle) < kPi / 2);
  }
  for (const auto& s : curve.samples) {
    CHECK(s.angle < kPi / 2);
    CHECK(s.radius > 1e-12);
  }
  CHECK(curve.samples.back().angle < -2 * kPi);

  // decreasing overall
  long down = 0, total = 0;
  for (std::size_t i = 0; i + 1 < curve.samples.size(); ++i, ++total)
    if (curve.samples[i + 1].angle < curve.samples[i].angle) ++down;
  CHECK(down >= (9 * total) / 10);

  // crossing radii increase with the index
  REQUIRE(curve.crossings.size() >= 2);
  for (std::size_t i = 0; i + 1 < curve.crossings.size(); ++i) {
    CHECK(curve.crossings[i].index + 1 == curve.crossings[i + 1].index);
    CHECK(curve.crossings[i].radius_last < curve.crossings[i + 1].radius_last);
  }

  // radius consistency against a fresh endpoint evaluation
  const auto& mid = curve.samples[curve.samples.size() / 2];
  const auto fresh = I_map(fam, 1.0, 3.0, mid.param, OdeOptions{}.with_tol(1e-9, 1e-9));
  CHECK(std::fabs(fresh.radius() - mid.radius) < 1e-10);
}

TEST_CASE("backward spiral turns the opposite way") {
  const auto fam = make_family(1, 2, 2);
  const auto curve = scan_spiral(SpiralSide::backward, 1.0, 200.0, fam, 1.0, 3.0);
  REQUIRE_FALSE(curve.samples.empty());
  CHECK(curve.samples.front().angle == 0.0);
  for (const auto& s : curve.samples) CHECK(s.angle > -kPi / 2);
  CHECK(curve.samples.back().angle > 2 * kPi);
  long up = 0, total = 0;
  for (std::size_t i = 0; i + 1 < curve.samples.size(); ++i, ++total)
    if (curve.samples[i + 1].angle > curve.samples[i].angle) ++up;
  CHECK(up >= (9 * total) / 10);
}

TEST_CASE("a range without crossings yields an empty crossing list") {
  const auto fam = make_family(1, 2, 2);
  const auto curve = scan_spiral(SpiralSide::forward, 0.5, 1.5, fam, 1.0, 3.0);
  CHECK(curve.crossings.empty());
  CHECK(curve.samples.front().param >= 0.5);
  CHECK(curve.samples.back().param <= 1.5);
}

TEST_CASE("zero count from the angle equals the event count on a grid") {
  const auto fam = make_family(1, 2, 2);
  const OdeOptions ode = OdeOptions{}.with_tol(1e-9, 1e-9);
  const auto curve = scan_spiral(SpiralSide::forward, 1.0, 100.0, fam, 1.0, 3.0);

  // at every curve sample
  for (const auto& s : curve.samples)
    CHECK(zero_count_from_angle(s.angle) == s.zero_count);

  // and on the integer grid, via local unwrapping
  for (int d = 1; d <= 100; ++d) {
    const auto traj = solve_forward(fam, 1.0, 3.0, static_cast<double>(d), ode);
    long events = 0;
    for (double z : traj.zeros())
      if (z < traj.r_end()) ++events;
    const PhasePoint pt{traj.nodes().back().w, traj.nodes().back().wp};
    const double theta = angle_at(curve, static_cast<double>(d), pt);
    CHECK(zero_count_from_angle(theta) == events);
  }
}

TEST_CASE("backward zero count formula on samples") {
  const auto fam = make_family(2, 1, 3);
  const auto curve = scan_spiral(SpiralSide::backward, 1.0, 60.0, fam, 1.0, 2.5);
  for (const auto& s : curve.samples)
    CHECK(N_from_angle(s.angle) == s.zero_count);
}

TEST_CASE("scan rejects invalid ranges") {
  const auto fam = make_family(1, 2, 2);
  CHECK_THROWS_AS(scan_spiral(SpiralSide::forward, -1.0, 2.0, fam, 1.0, 3.0), error);
  CHECK_THROWS_AS(scan_spiral(SpiralSide::forward, 2.0, 1.0, fam, 1.0, 3.0), error);
}
