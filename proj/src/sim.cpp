#include "shuttle/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "shuttle/text.hpp"

namespace shuttle {

World make_default_world() {
  World w;
  constexpr double hx = 30.0 - 0.15, hy = 20.0 - 0.15, t = 0.3, wall_h = 2.5;
  w.obstacles.push_back(Obstacle::wall(-hx, -hy, hx, -hy, t, wall_h));
  w.obstacles.push_back(Obstacle::wall(hx, -hy, hx, hy, t, wall_h));
  w.obstacles.push_back(Obstacle::wall(hx, hy, -hx, hy, t, wall_h));
  w.obstacles.push_back(Obstacle::wall(-hx, hy, -hx, -hy, t, wall_h));
  w.obstacles.push_back(Obstacle::box(0.0, 0.0, 24.0, 6.0, 6.0));
  w.obstacles.push_back(Obstacle::box(-22.0, 13.0, 2.0, 2.0, 2.0));
  w.obstacles.push_back(Obstacle::box(-8.0, 14.0, 3.0, 1.5, 1.5));
  w.obstacles.push_back(Obstacle::box(-20.0, -14.0, 1.5, 1.5, 1.2));
  w.obstacles.push_back(Obstacle::box(-6.0, -14.5, 2.0, 1.0, 2.0));
  return w;
}

namespace {

// Waypoint intervals per default 10-point segment; generated paths split evenly.
constexpr int kDefaultIntervalsPerSegment = 9;

// Heading after arc length s along a lap of straights and clothoid-arc-clothoid turns.
struct LoopProfile {
  double straight = 32.0;
  double ramp = 4.0;
  double radius = kDefaultApexRadius;

  double arc() const { return radius * std::numbers::pi - ramp; }
  double turn() const { return 2.0 * ramp + arc(); }
  double lap() const { return 2.0 * (straight + turn()); }

  // Heading change accumulated within one turn after u metres.
  double turn_heading(double u) const {
    const double k = 1.0 / radius;
    if (u <= ramp) return 0.5 * k * u * u / ramp;
    const double h_ramp = 0.5 * k * ramp;
    if (u <= ramp + arc()) return h_ramp + k * (u - ramp);
    const double v = turn() - u;
    return std::numbers::pi - 0.5 * k * v * v / ramp;
  }

  double heading(double s) const {
    const double half = straight + turn();
    double base = 0.0;
    if (s >= half) {
      s -= half;
      base = std::numbers::pi;
    }
    if (s <= straight) return base;
    return base + turn_heading(std::min(s - straight, turn()));
  }
};

}  // namespace

std::vector<Vec2> make_default_path() {
  const LoopProfile prof;
  const double lap = prof.lap();
  const int n = kDefaultIntervalsPerSegment * static_cast<int>(std::ceil(lap / 0.5 / kDefaultIntervalsPerSegment));
  constexpr int kSub = 500;
  const double ds = lap / (static_cast<double>(n) * kSub);
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(n) + 1);
  Vec2 p{0.0, 0.0};
  pts.push_back(p);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < kSub; ++k) {
      const double s = (static_cast<double>(i) * kSub + k + 0.5) * ds;
      const double th = prof.heading(s);
      p.x += ds * std::cos(th);
      p.y += ds * std::sin(th);
    }
    pts.push_back(p);
  }
  pts.back() = pts.front();
  double minx = pts[0].x, maxx = pts[0].x, miny = pts[0].y, maxy = pts[0].y;
  for (const Vec2& q : pts) {
    minx = std::min(minx, q.x);
    maxx = std::max(maxx, q.x);
    miny = std::min(miny, q.y);
    maxy = std::max(maxy, q.y);
  }
  const double cx = 0.5 * (minx + maxx), cy = 0.5 * (miny + maxy);
  for (Vec2& q : pts) {
    q.x -= cx;
    q.y -= cy;
  }
  return pts;
}

World make_room_world() {
  World w;
  constexpr double a = 5.15, t = 0.3, h = 2.5;
  w.obstacles.push_back(Obstacle::wall(-a, -a, a, -a, t, h));
  w.obstacles.push_back(Obstacle::wall(a, -a, a, a, t, h));
  w.obstacles.push_back(Obstacle::wall(a, a, -a, a, t, h));
  w.obstacles.push_back(Obstacle::wall(-a, a, -a, -a, t, h));
  w.obstacles.push_back(Obstacle::box(2.5, 1.5, 1.0, 0.6, 1.5));
  w.obstacles.push_back(Obstacle::box(-2.0, -2.5, 0.8, 0.8, 1.2));
  return w;
}

World make_corridor_world(double length) {
  if (!(length > 0.0)) throw std::invalid_argument("corridor length must be positive");
  World w;
  constexpr double a = 5.15, t = 0.3, h = 2.5;
  const double x0 = -10.15, x1 = length + 10.15;
  w.obstacles.push_back(Obstacle::wall(x0, -a, x1, -a, t, h));
  w.obstacles.push_back(Obstacle::wall(x1, -a, x1, a, t, h));
  w.obstacles.push_back(Obstacle::wall(x1, a, x0, a, t, h));
  w.obstacles.push_back(Obstacle::wall(x0, a, x0, -a, t, h));
  int k = 0;
  for (double x = 6.0; x < length + 6.0; x += 12.0, ++k) {
    w.obstacles.push_back(Obstacle::box(x, (k % 2 == 0) ? 4.0 : -4.0, 0.6, 0.6, 2.5));
  }
  return w;
}

std::vector<Vec2> make_straight_path(double length, double spacing) {
  if (!(length > 0.0) || !(spacing > 0.0)) throw std::invalid_argument("straight path needs positive length and spacing");
  const int n = kDefaultIntervalsPerSegment * std::max(2, static_cast<int>(std::lround(length / spacing / kDefaultIntervalsPerSegment)));
  std::vector<Vec2> pts;
  for (int i = 0; i <= n; ++i) pts.push_back({length * i / n, 0.0});
  return pts;
}

std::string to_string(LocalizationMode m) { return m == LocalizationMode::kSlam ? "slam" : "truth"; }

std::optional<LocalizationMode> parse_mode(const std::string& s) {
  if (s == "slam") return LocalizationMode::kSlam;
  if (s == "truth") return LocalizationMode::kTruth;
  return std::nullopt;
}

void SimRun::validate() const {
  lidar.validate();
  vehicle.validate();
  pid.validate();
  if (!(duration >= 0.0) || !std::isfinite(duration)) throw std::invalid_argument("duration must be non-negative");
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (steps_per_frame < 1) throw std::invalid_argument("steps per frame must be at least 1");
  if (!(speed > 0.0) || !(speed_tau > 0.0) || !(initial_speed >= 0.0)) {
    throw std::invalid_argument("speed, speed lag and initial speed must be positive");
  }
  if (!(off_path_limit > 0.0) || !(bounds_margin >= 0.0)) throw std::invalid_argument("limits must be positive");
}

namespace {

// Rigid-body and lateral state integrated by the loop.
struct PlantState {
  double X = 0, Y = 0, psi = 0, beta = 0, r = 0, V = 0;
};

constexpr double kMinDynamicSpeed = 0.1;

PlantState derivative(const PlantState& s, double delta, const SimRun& run) {
  PlantState d;
  d.V = (run.speed - s.V) / run.speed_tau;
  d.X = s.V * std::cos(s.psi);
  d.Y = s.V * std::sin(s.psi);
  d.psi = s.r;
  if (s.V >= kMinDynamicSpeed) {
    VehicleParams p = run.vehicle;
    p.V = s.V;
    const LateralModel m = lateral_model(p);
    d.beta = m.A(0, 0) * s.beta + m.A(0, 1) * s.r + m.B(0, 0) * delta;
    d.r = m.A(1, 0) * s.beta + m.A(1, 1) * s.r + m.B(1, 0) * delta;
  }
  return d;
}

PlantState axpy(const PlantState& s, const PlantState& d, double h) {
  return {s.X + h * d.X, s.Y + h * d.Y, s.psi + h * d.psi, s.beta + h * d.beta, s.r + h * d.r, s.V + h * d.V};
}

// Number of RK4 substeps keeping the stiff (beta, r) block inside the stability region.
int substeps(const PlantState& s, double dt, const SimRun& run) {
  if (s.V < kMinDynamicSpeed) return 1;
  VehicleParams p = run.vehicle;
  p.V = s.V;
  const LateralModel m = lateral_model(p);
  const double bound = std::max(std::abs(m.A(0, 0)) + std::abs(m.A(0, 1)), std::abs(m.A(1, 0)) + std::abs(m.A(1, 1)));
  return std::clamp(static_cast<int>(std::ceil(dt * bound / 2.0)), 1, 10000);
}

PlantState rk4(const PlantState& s, double delta, double dt, const SimRun& run) {
  const int n = substeps(s, dt, run);
  const double h = dt / n;
  PlantState x = s;
  for (int i = 0; i < n; ++i) {
    const PlantState k1 = derivative(x, delta, run);
    const PlantState k2 = derivative(axpy(x, k1, 0.5 * h), delta, run);
    const PlantState k3 = derivative(axpy(x, k2, 0.5 * h), delta, run);
    const PlantState k4 = derivative(axpy(x, k3, h), delta, run);
    x.X += h / 6.0 * (k1.X + 2 * k2.X + 2 * k3.X + k4.X);
    x.Y += h / 6.0 * (k1.Y + 2 * k2.Y + 2 * k3.Y + k4.Y);
    x.psi += h / 6.0 * (k1.psi + 2 * k2.psi + 2 * k3.psi + k4.psi);
    x.beta += h / 6.0 * (k1.beta + 2 * k2.beta + 2 * k3.beta + k4.beta);
    x.r += h / 6.0 * (k1.r + 2 * k2.r + 2 * k3.r + k4.r);
    x.V += h / 6.0 * (k1.V + 2 * k2.V + 2 * k3.V + k4.V);
  }
  return x;
}

void fail(RunReport& rep, const std::string& why) {
  rep.failed = true;
  rep.failure_reason = why;
}

}  // namespace

RunReport run_closed_loop(const SimRun& run) {
  run.validate();
  RunReport rep;
  const PathSpline path = fit_path(run.waypoints, run.seg_len);
  rep.path_rms = path.residual_rms();
  if (run.duration <= 0.0) return rep;

  const Vec2 start = path.start();
  const Vec2 tangent = path[0].derivative(0.0);
  PlantState plant;
  plant.X = start.x;
  plant.Y = start.y;
  plant.psi = std::atan2(tangent.y, tangent.x);
  plant.V = run.initial_speed;
  auto truth_pose = [&] { return PoseSE2{plant.X, plant.Y, wrap_angle(plant.psi)}; };

  const Vec2 lo = run.world.min_corner(), hi = run.world.max_corner();
  if (run.world.inside_obstacle(start)) throw std::invalid_argument("path start lies inside an obstacle");

  std::optional<SlamSession> session;
  if (run.mode == LocalizationMode::kSlam) {
    SlamConfig sc = run.slam;
    sc.origin = truth_pose();
    sc.map_center = Vec2{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)};
    session.emplace(sc);
  }
  std::mt19937_64 rng(run.seed);

  PidController pid(run.pid);
  double delta = 0.0;
  PoseSE2 estimate = truth_pose();
  std::size_t truth_hint = 0, est_hint = 0;
  const auto steps = static_cast<long>(std::ceil(run.duration / run.dt - 1e-9));
  double sq = 0.0;

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * run.dt;
    const PoseSE2 truth = truth_pose();
    if (truth.x < lo.x - run.bounds_margin || truth.x > hi.x + run.bounds_margin || truth.y < lo.y - run.bounds_margin ||
        truth.y > hi.y + run.bounds_margin) {
      fail(rep, "vehicle left the world bounds");
      break;
    }

    if (k % run.steps_per_frame == 0) {
      if (session) {
        const auto cloud = raycast_frame(run.world, truth, run.lidar, t, &rng);
        if (!cloud) {
          fail(rep, "sensor inside an obstacle");
          break;
        }
        const FrameReport fr = session->process_frame(*cloud);
        ++rep.frames;
        if (fr.converged) ++rep.frames_converged;
        estimate = fr.pose;
      }
    }
    if (!session) estimate = truth;

    const auto te = path_error(path, truth, run.vehicle.l_s, truth_hint, run.off_path_limit);
    if (!te) {
      fail(rep, "vehicle left the path neighbourhood");
      break;
    }
    truth_hint = te->segment;
    if (te->past_end) {
      rep.completed = true;
      break;
    }
    const auto ee = path_error(path, estimate, run.vehicle.l_s, est_hint, run.off_path_limit);
    if (!ee) {
      fail(rep, "pose estimate left the path neighbourhood");
      break;
    }
    est_hint = ee->segment;

    delta = command_filter(delta, pid.step(ee->y, run.dt));
    rep.samples.push_back({t, truth, estimate, te->h, ee->y, delta});
    sq += te->h * te->h;
    rep.max_error = std::max(rep.max_error, std::abs(te->h));

    plant = rk4(plant, delta, run.dt, run);
  }
  if (!rep.samples.empty()) rep.rmse = std::sqrt(sq / static_cast<double>(rep.samples.size()));
  return rep;
}

void write_run_csv(const std::string& path, const RunReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write run report '" + path + "'");
  out << "t,X_true,Y_true,psi_true,X_est,Y_est,psi_est,h,y,delta_f\n";
  for (const RunSample& s : report.samples) {
    out << text::num(s.t) << ',' << text::num(s.truth.x) << ',' << text::num(s.truth.y) << ',' << text::num(s.truth.theta)
        << ',' << text::num(s.estimate.x) << ',' << text::num(s.estimate.y) << ',' << text::num(s.estimate.theta) << ','
        << text::num(s.h) << ',' << text::num(s.y) << ',' << text::num(s.delta_f) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<RunSample> read_run_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run report '" + path + "'");
  std::vector<RunSample> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = text::trim(line);
    if (t.empty()) continue;
    if (lineno == 1 && t.starts_with("t,")) continue;
    const auto f = text::split(t, ',');
    double v[10];
    bool ok = f.size() == 10;
    for (std::size_t i = 0; ok && i < 10; ++i) ok = text::parse_double(text::trim(f[i]), v[i]);
    if (!ok) throw LogParseError(lineno, "expected 10 numeric columns", path);
    rows.push_back({v[0], {v[1], v[2], v[3]}, {v[4], v[5], v[6]}, v[7], v[8], v[9]});
  }
  return rows;
}

void write_run_summary(const std::string& path, const RunReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write run summary '" + path + "'");
  out << "rmse_m = " << text::num(report.rmse) << '\n'
      << "max_error_m = " << text::num(report.max_error) << '\n'
      << "failed = " << (report.failed ? "true" : "false") << '\n'
      << "reason = " << report.failure_reason << '\n'
      << "completed = " << (report.completed ? "true" : "false") << '\n'
      << "samples = " << report.samples.size() << '\n'
      << "frames = " << report.frames << '\n'
      << "frames_converged = " << report.frames_converged << '\n'
      << "path_fit_rms_m = " << text::num(report.path_rms) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace shuttle
