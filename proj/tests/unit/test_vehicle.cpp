#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "shuttle/sim.hpp"
#include "shuttle/vehicle.hpp"

using namespace shuttle;
namespace st = shuttle::testing;

namespace {

struct Coeffs {
  double a11, a12, a21, a22, b1, b2;
};

// Single-track coefficients written out from the parameter definitions.
Coeffs coeffs(const VehicleParams& p) {
  const double V = p.V;
  return {-(p.C_r + p.C_f) / (p.m * V),
          -1.0 + (p.C_r * p.l_r - p.C_f * p.l_f) / (p.m * V * V),
          (p.C_r * p.l_r - p.C_f * p.l_f) / p.J,
          -(p.C_r * p.l_r * p.l_r + p.C_f * p.l_f * p.l_f) / (p.J * V),
          p.C_f / (p.m * V),
          p.C_f * p.l_f / p.J};
}

// Cramer's rule on the 2x2 equilibrium a x + b delta = 0.
SteadyState cramer(const VehicleParams& p, double delta) {
  const Coeffs c = coeffs(p);
  const double det = c.a11 * c.a22 - c.a12 * c.a21;
  const double r1 = -c.b1 * delta, r2 = -c.b2 * delta;
  return {(r1 * c.a22 - c.a12 * r2) / det, (c.a11 * r2 - r1 * c.a21) / det};
}

LateralState rk4(const LateralState& x0, double delta, const VehicleParams& p, double dt, double t_end) {
  LateralState x = x0;
  const int n = static_cast<int>(std::lround(t_end / dt));
  for (int i = 0; i < n; ++i) {
    const LateralState k1 = lateral_dynamics(x, delta, 0.0, p);
    const LateralState k2 = lateral_dynamics(x + 0.5 * dt * k1, delta, 0.0, p);
    const LateralState k3 = lateral_dynamics(x + 0.5 * dt * k2, delta, 0.0, p);
    const LateralState k4 = lateral_dynamics(x + dt * k3, delta, 0.0, p);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

VehicleParams at_speed(double v) {
  VehicleParams p;
  p.V = v;
  return p;
}

double curvature(const CubicSegment& s, double l) {
  const Vec2 d = s.derivative(l);
  const Vec2 dd = s.second_derivative(l);
  return std::abs(d.x * dd.y - d.y * dd.x) / std::pow(std::hypot(d.x, d.y), 3.0);
}

void check_continuity(const PathSpline& path) {
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Vec2 a = path[i].position(1.0), b = path[i + 1].position(0.0);
    const Vec2 da = path[i].derivative(1.0), db = path[i + 1].derivative(0.0);
    CHECK(std::hypot(a.x - b.x, a.y - b.y) < 1e-9);
    CHECK(std::hypot(da.x - db.x, da.y - db.y) < 1e-9);
  }
}

PathSpline straight(double length = 40.0) {
  const auto pts = make_straight_path(length);
  return fit_path(pts);
}

}  // namespace

TEST_CASE("a11 at 3.33 m/s is -103.65 1/s within 0.5%") {
  const LateralModel m = lateral_model(at_speed(3.33));
  CHECK(std::abs(m.A(0, 0) - (-103.65)) <= 0.005 * 103.65);
  CHECK(m.A(0, 0) == doctest::Approx(-(5.0e5 + 1.9e5) / (2000.0 * 3.33)).epsilon(1e-12));
}

TEST_CASE("model matrices follow the single-track coefficients") {
  const VehicleParams p;
  const LateralModel m = lateral_model(p);
  const Coeffs c = coeffs(p);
  CHECK(m.A(0, 0) == doctest::Approx(c.a11).epsilon(1e-12));
  CHECK(m.A(0, 1) == doctest::Approx(c.a12).epsilon(1e-12));
  CHECK(m.A(1, 0) == doctest::Approx(c.a21).epsilon(1e-12));
  CHECK(m.A(1, 1) == doctest::Approx(c.a22).epsilon(1e-12));
  CHECK(m.B(0, 0) == doctest::Approx(c.b1).epsilon(1e-12));
  CHECK(m.B(1, 0) == doctest::Approx(c.b2).epsilon(1e-12));
  CHECK(m.B(2, 1) == -p.V);
  CHECK(m.B(3, 1) == p.l_s * p.V);
  CHECK(m.A(2, 1) == 1.0);
  CHECK(m.A(3, 0) == p.V);
  CHECK(m.A(3, 1) == p.l_s);
  CHECK(m.A(3, 2) == p.V);
}

TEST_CASE("non-positive speed is rejected") {
  CHECK_THROWS_AS(lateral_model(at_speed(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(lateral_dynamics(LateralState::Zero(), 0.1, 0.0, at_speed(-1.0)), std::invalid_argument);
  VehicleParams p;
  p.C_f = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK_NOTHROW(VehicleParams{}.validate());
}

TEST_CASE("zero state and zero input are an equilibrium") {
  CHECK(lateral_dynamics(LateralState::Zero(), 0.0, 0.0, VehicleParams{}).isZero(0.0));
}

TEST_CASE("dynamics are linear in state and input") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const VehicleParams p;
  for (int k = 0; k < 200; ++k) {
    const LateralState x(u(rng), u(rng), u(rng), u(rng));
    const double d = 0.3 * u(rng), rho = 0.1 * u(rng), a = 3.0 * u(rng);
    const LateralState lhs = lateral_dynamics(a * x, a * d, a * rho, p);
    const LateralState rhs = a * lateral_dynamics(x, d, rho, p);
    CHECK((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    const LateralState x2(u(rng), u(rng), u(rng), u(rng));
    const LateralState sum = lateral_dynamics(x + x2, d, rho, p);
    const LateralState parts = lateral_dynamics(x, d, rho, p) + lateral_dynamics(x2, 0.0, 0.0, p);
    CHECK((sum - parts).norm() <= 1e-12 * (1.0 + sum.norm()));
  }
}

TEST_CASE("steady state matches Cramer's rule and a 10 s RK4 run within 0.1%") {
  const VehicleParams p = at_speed(3.33);
  for (double delta : {0.02, 0.1, -0.3, 0.5}) {
    const SteadyState ss = steady_state(p, delta);
    const SteadyState ref = cramer(p, delta);
    CHECK(ss.beta == doctest::Approx(ref.beta).epsilon(1e-12));
    CHECK(ss.r == doctest::Approx(ref.r).epsilon(1e-12));
    const LateralState x = rk4(LateralState::Zero(), delta, p, 0.001, 10.0);
    CHECK(std::abs(x(0) - ref.beta) <= 1e-3 * std::abs(ref.beta));
    CHECK(std::abs(x(1) - ref.r) <= 1e-3 * std::abs(ref.r));
  }
}

TEST_CASE("turn radius at full lock is tighter than the default path's turns") {
  const VehicleParams p;
  const double r = turn_radius(p, PidConfig{}.delta_max);
  CHECK(r < kDefaultApexRadius);
  CHECK(r > 0.0);
  CHECK(turn_radius(p, -0.5) == doctest::Approx(r));
  CHECK(r == doctest::Approx(p.V / std::abs(cramer(p, 0.5).r)).epsilon(1e-12));
}

TEST_CASE("collinear points fit exactly linear segments") {
  std::vector<Vec2> pts;
  for (int i = 0; i < 46; ++i) pts.push_back({1.0 + 0.7 * i, -2.0 + 0.3 * i});
  const PathSpline s = fit_path(pts);
  REQUIRE(s.size() == 5);
  for (const auto& seg : s.segments()) {
    CHECK(std::abs(seg.ax) < 1e-9);
    CHECK(std::abs(seg.bx) < 1e-9);
    CHECK(std::abs(seg.ay) < 1e-9);
    CHECK(std::abs(seg.by) < 1e-9);
  }
  CHECK(s.residual_rms() < 1e-9);
  CHECK(s.max_residual() < 1e-9);
  check_continuity(s);
  CHECK(s.length() == doctest::Approx(45.0 * std::hypot(0.7, 0.3)).epsilon(1e-9));
}

TEST_CASE("200 points on a 20 m circle fit within 5 mm radially") {
  std::vector<Vec2> pts;
  for (int i = 0; i < 200; ++i) {
    const double a = 2.0 * st::kPi * i / 200.0;
    pts.push_back({20.0 * std::cos(a), 20.0 * std::sin(a)});
  }
  const PathSpline s = fit_path(pts, 10);
  check_continuity(s);
  double worst = 0.0;
  for (const auto& seg : s.segments()) {
    for (int k = 0; k <= 100; ++k) {
      const Vec2 q = seg.position(k / 100.0);
      worst = std::max(worst, std::abs(std::hypot(q.x, q.y) - 20.0));
    }
  }
  MESSAGE("max radial deviation " << worst);
  CHECK(worst < 0.005);
}

TEST_CASE("bundled and random paths keep C0 and C1 at every joint") {
  check_continuity(fit_path(make_default_path()));
  check_continuity(straight());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.05);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec2> pts;
    double x = 0.0, y = 0.0, h = 0.0;
    for (int i = 0; i < 64; ++i) {
      h += n(rng);
      x += 0.5 * std::cos(h);
      y += 0.5 * std::sin(h);
      pts.push_back({x, y});
    }
    check_continuity(fit_path(pts, 10));
  }
}

TEST_CASE("invalid waypoint sets are rejected") {
  std::vector<Vec2> few(12, Vec2{0.0, 0.0});
  for (int i = 0; i < 12; ++i) few[static_cast<std::size_t>(i)] = {0.5 * i, 0.0};
  CHECK_THROWS_AS(fit_path(few, 10), std::invalid_argument);
  std::vector<Vec2> same(40, Vec2{1.0, 1.0});
  CHECK_THROWS_AS(fit_path(same, 10), std::invalid_argument);
  auto pts = make_straight_path(20.0);
  pts[4].y = std::nan("");
  CHECK_THROWS_AS(fit_path(pts, 10), std::invalid_argument);
}

TEST_CASE("default path curvature never exceeds 1/6 m") {
  const PathSpline s = fit_path(make_default_path());
  double kmax = 0.0;
  for (const auto& seg : s.segments()) {
    for (int k = 0; k <= 50; ++k) kmax = std::max(kmax, curvature(seg, k / 50.0));
  }
  MESSAGE("minimum radius " << 1.0 / kmax);
  CHECK(1.0 / kmax >= 6.0);
  const Vec2 a = s.start(), b = s.end();
  // End points are least-squares fitted, not interpolated.
  CHECK(std::hypot(a.x - b.x, a.y - b.y) < 0.01);
}

TEST_CASE("path error examples on a straight path") {
  const PathSpline s = straight();
  SUBCASE("on the path and aligned") {
    const auto e = path_error(s, {10.0, 0.0, 0.0}, 2.0);
    REQUIRE(e);
    CHECK(std::abs(e->h) < 1e-9);
    CHECK(std::abs(e->dpsi) < 1e-9);
    CHECK(std::abs(e->y) < 1e-9);
  }
  SUBCASE("offset 0.5 m to the left") {
    const auto e = path_error(s, {10.0, 0.5, 0.0}, 2.0);
    REQUIRE(e);
    CHECK(e->h == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(e->y == doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("30 degree heading error") {
    const auto e = path_error(s, {10.0, 0.0, st::deg(30.0)}, 2.0);
    REQUIRE(e);
    CHECK(e->dpsi == doctest::Approx(st::deg(30.0)).epsilon(1e-9));
    CHECK(e->y == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("right of the path is negative") {
    const auto e = path_error(s, {10.0, -0.7, 0.0}, 2.0);
    REQUIRE(e);
    CHECK(e->h == doctest::Approx(-0.7).epsilon(1e-9));
  }
  SUBCASE("beyond the neighborhood") {
    CHECK(!path_error(s, {10.0, 12.0, 0.0}, 2.0));
  }
  SUBCASE("past the end") {
    const auto e = path_error(s, {45.0, 0.0, 0.0}, 2.0);
    REQUIRE(e);
    CHECK(e->past_end);
  }
}

TEST_CASE("reflecting the pose across the path tangent negates h, dpsi and y") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(2.0, 38.0), uy(-2.0, 2.0), ut(-1.0, 1.0);
  const PathSpline s = straight();
  for (int k = 0; k < 200; ++k) {
    const double x = ux(rng), y = uy(rng), th = ut(rng);
    const auto a = path_error(s, {x, y, th}, 2.0);
    const auto b = path_error(s, {x, -y, -th}, 2.0);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->h == doctest::Approx(-b->h).epsilon(1e-9).scale(1.0));
    CHECK(a->dpsi == doctest::Approx(-b->dpsi).epsilon(1e-9).scale(1.0));
    CHECK(a->y == doctest::Approx(-b->y).epsilon(1e-9).scale(1.0));
    CHECK(a->y == doctest::Approx(a->h + 2.0 * std::sin(a->dpsi)).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("signed offset from a circular path matches the radial distance") {
  std::vector<Vec2> pts;
  for (int i = 0; i <= 180; ++i) {
    const double a = st::kPi * i / 180.0;
    pts.push_back({20.0 * std::cos(a), 20.0 * std::sin(a)});
  }
  const PathSpline s = fit_path(pts, 10);
  for (double a : {0.5, 1.0, 2.0}) {
    const double rr = 19.4;  // inside a counter-clockwise circle is left of the path
    const auto e = path_error(s, {rr * std::cos(a), rr * std::sin(a), a + st::kPi / 2.0}, 2.0);
    REQUIRE(e);
    CHECK(e->h == doctest::Approx(0.6).epsilon(0.01));
    CHECK(std::abs(e->dpsi) < 1e-3);
  }
}

TEST_CASE("PID examples") {
  SUBCASE("zero error stays zero") {
    PidController c;
    for (int i = 0; i < 100; ++i) CHECK(c.step(0.0, 0.01) == 0.0);
  }
  SUBCASE("P-only step") {
    PidController c({0.2, 0.0, 0.0, 0.5, 0.5});
    CHECK(c.step(1.0, 0.01) == doctest::Approx(-0.2).epsilon(1e-15));
  }
  SUBCASE("output saturates at the steering limit") {
    PidController c;
    CHECK(c.step(1.0, 0.01) == -0.5);
    c.reset();
    CHECK(c.step(-3.0, 0.01) == 0.5);
  }
  SUBCASE("non-positive dt is rejected") {
    PidController c;
    CHECK_THROWS_AS(c.step(0.1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(c.step(0.1, -0.01), std::invalid_argument);
  }
  SUBCASE("integral contribution is clamped") {
    PidController c({0.0, 1.5, 0.0, 0.5, 0.2});
    for (int i = 0; i < 1000; ++i) c.step(1.0, 0.01);
    CHECK(c.integral() == -0.2);
    CHECK(c.step(1.0, 0.01) == -0.2);
    c.reset();
    CHECK(c.integral() == 0.0);
  }
  SUBCASE("derivative acts on the change of error") {
    PidController c({0.0, 0.0, 0.1, 0.5, 0.5});
    CHECK(c.step(0.0, 0.01) == 0.0);
    CHECK(c.step(0.01, 0.01) == doctest::Approx(-0.1).epsilon(1e-12));
  }
  SUBCASE("invalid gains are rejected") {
    CHECK_THROWS_AS(PidController({-1.0, 0.0, 0.0, 0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(PidController({1.0, 0.0, 0.0, 0.0, 0.5}), std::invalid_argument);
  }
}

TEST_CASE("command filter passes a quarter of the change") {
  CHECK(command_filter(0.0, 1.0) == 0.25);
  for (double c : {-0.4, 0.0, 0.123}) CHECK(command_filter(c, c) == c);
}

TEST_CASE("command filter contracts by 0.75 toward the command") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int k = 0; k < 100; ++k) {
    const double a = u(rng), b = u(rng), t = u(rng);
    CHECK(std::abs(command_filter(a, t) - command_filter(b, t)) ==
          doctest::Approx(0.75 * std::abs(a - b)).epsilon(1e-12).scale(1.0));
  }
  double x = 0.0;
  int first_within = -1;
  for (int n = 1; n <= 30; ++n) {
    x = command_filter(x, 1.0);
    CHECK(1.0 - x == doctest::Approx(std::pow(0.75, n)).epsilon(1e-12));
    if (first_within < 0 && 1.0 - x <= 0.01) first_within = n;
  }
  // 0.75^16 = 1.0023%, so the error first drops to 1% on step 17.
  CHECK(first_within == 17);
}

TEST_CASE("waypoint CSV round trip") {
  const auto pts = make_default_path();
  const auto dir = st::scratch_dir("waypoints");
  const std::string p = (dir / "w.csv").string();
  write_waypoints_csv(p, pts);
  const auto back = read_waypoints_csv(p);
  REQUIRE(back.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(back[i].x == doctest::Approx(pts[i].x).epsilon(1e-8));
    CHECK(back[i].y == doctest::Approx(pts[i].y).epsilon(1e-8));
  }
  std::ofstream(dir / "bad.csv") << "x_m,y_m\n1,2\n3\n";
  CHECK_THROWS(read_waypoints_csv((dir / "bad.csv").string()));
}
