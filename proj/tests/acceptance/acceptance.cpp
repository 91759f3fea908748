// Acceptance suite: one PASS/FAIL line per criterion, tolerances and runtime budgets pinned below.
// Usage: acceptance [criterion numbers...]; exit status is the number of failed criteria.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "shuttle/cli.hpp"
#include "shuttle/slam.hpp"
#include "shuttle/vehicle.hpp"

using namespace shuttle;
namespace st = shuttle::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Interpolation exactness on affine fields.
Outcome interpolation_exactness() {
  constexpr double kTol = 1e-9;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> coef(-0.3, 0.3), res(0.02, 0.5), frac(0.0, 1.0);
  double worst_v = 0.0, worst_g = 0.0;
  int samples = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const double r = res(rng);
    const std::size_t n = 16;
    const double a = coef(rng) / (r * n), b = coef(rng) / (r * n);
    const Vec2 origin{-3.0 * frac(rng), 2.0 * frac(rng)};
    OccupancyGrid g(r, origin, n, n, LogOddsModel{4.0, -0.4, -50.0, 50.0});
    const Vec2 mid{origin.x + 0.5 * r * n, origin.y + 0.5 * r * n};
    auto field = [&](Vec2 p) { return 0.5 + a * (p.x - mid.x) + b * (p.y - mid.y); };
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const CellIndex c{static_cast<long>(i), static_cast<long>(j)};
        g.set_probability(c, field(g.cell_center(c)));
      }
    }
    const double lo = 0.5 * r, span = r * static_cast<double>(n - 1);
    for (int k = 0; k < 400; ++k) {
      const Vec2 p{origin.x + lo + span * frac(rng), origin.y + lo + span * frac(rng)};
      const auto m = g.interpolate(p);
      if (!m) return {false, fmt("in-bounds point (%.6f, %.6f) reported out of bounds", p.x, p.y)};
      worst_v = std::max(worst_v, std::abs(m->value - field(p)));
      worst_g = std::max({worst_g, std::abs(m->gradient.x - a), std::abs(m->gradient.y - b)});
      ++samples;
    }
  }
  return {worst_v < kTol && worst_g < kTol,
          fmt("%d samples, max value error %.2e, max gradient error %.2e (tol %.0e)", samples, worst_v, worst_g, kTol)};
}

// 2. Residual Jacobians against central finite differences.
Outcome jacobian_correctness() {
  constexpr double kRel = 1e-4, kH = 1e-7;
  constexpr int kMinConfigs = 1000;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0), a(-st::kPi, st::kPi), p01(0.02, 0.98);
  auto interp_cell = [](const OccupancyGrid& g, Vec2 p) {
    return std::pair<long, long>{static_cast<long>(std::floor((p.x - g.origin().x) / g.resolution() - 0.5)),
                                 static_cast<long>(std::floor((p.y - g.origin().y) / g.resolution() - 0.5))};
  };
  int tested = 0, bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double res = 0.05;
    const std::size_t n = 120;
    OccupancyGrid g(res, {-0.5 * res * n, -0.5 * res * n}, n, n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) g.set_probability({static_cast<long>(i), static_cast<long>(j)}, p01(rng));
    }
    for (int k = 0; k < 80; ++k) {
      const PoseSE2 p{u(rng), u(rng), a(rng)};
      const std::vector<Vec2> s{{u(rng), u(rng)}};
      const Vec2 w = transform_endpoint(p, s[0]);
      bool interior = true;
      for (int d = 0; d < 3; ++d) {
        for (double sg : {-1.0, 1.0}) {
          PoseSE2 q = p;
          (d == 0 ? q.x : d == 1 ? q.y : q.theta) += sg * kH;
          interior &= interp_cell(g, transform_endpoint(q, s[0])) == interp_cell(g, w);
        }
      }
      if (!interior) continue;
      const auto lin = residual_and_jacobian(g, p, s, 0.5);
      if (lin.in_bounds != 1) continue;
      const Eigen::Vector3d J(lin.terms[0].jacobian[0], lin.terms[0].jacobian[1], lin.terms[0].jacobian[2]);
      Eigen::Vector3d fd;
      for (int d = 0; d < 3; ++d) {
        PoseSE2 qp = p, qm = p;
        (d == 0 ? qp.x : d == 1 ? qp.y : qp.theta) += kH;
        (d == 0 ? qm.x : d == 1 ? qm.y : qm.theta) -= kH;
        const double rp = residual_and_jacobian(g, qp, s, 0.5).terms[0].residual;
        const double rm = residual_and_jacobian(g, qm, s, 0.5).terms[0].residual;
        fd[d] = -(rp - rm) / (2 * kH);  // J is the gradient of M and r = 1 - M
      }
      const double rel = (J - fd).norm() / std::max(J.norm(), 1e-12);
      worst = std::max(worst, rel);
      bad += rel >= kRel ? 1 : 0;
      ++tested;
    }
  }
  return {tested >= kMinConfigs && bad == 0,
          fmt("%d configurations, max relative error %.2e (tol %.0e), %d above tolerance", tested, worst, kRel, bad)};
}

// Exhaustive lattice minimum of the alignment error around `centre`.
PoseSE2 lattice_minimum(const OccupancyGrid& g, std::span<const Vec2> pts, const PoseSE2& centre) {
  constexpr double kSpan = 0.3, kStep = 0.01, kAngSpan = 10.0, kAngStep = 0.25;
  PoseSE2 best = centre;
  double best_e = std::numeric_limits<double>::infinity();
  const int nt = static_cast<int>(std::lround(kSpan / kStep));
  const int na = static_cast<int>(std::lround(kAngSpan / kAngStep));
  for (int ia = -na; ia <= na; ++ia) {
    const double th = centre.theta + st::deg(ia * kAngStep);
    for (int ix = -nt; ix <= nt; ++ix) {
      for (int iy = -nt; iy <= nt; ++iy) {
        const PoseSE2 p{centre.x + ix * kStep, centre.y + iy * kStep, th};
        std::size_t in = 0;
        double e = 0.0;
        for (const Vec2& s : pts) {
          const auto m = g.interpolate(transform_endpoint(p, s));
          if (!m) continue;
          ++in;
          e += (1.0 - m->value) * (1.0 - m->value);
        }
        if (in < pts.size()) continue;  // compare only poses that see every point
        if (e < best_e) {
          best_e = e;
          best = p;
        }
      }
    }
  }
  return best;
}

// 3. Pose recovery on the room suite, cross-checked against the lattice oracle.
Outcome pose_recovery() {
  constexpr double kTx = 0.02, kTy = 0.02, kTth = 0.5;  // m, m, deg
  constexpr int kTrials = 100, kMaxIter = 10, kOracleTrials = 3, kSubsample = 8;
  constexpr double kRate = 0.95;
  const OccupancyPyramid pyr = st::room_pyramid();
  const auto suite = st::displaced_suite(kTrials, 0.2, 0.1, st::deg(5.0), 42);
  int ok = 0;
  std::vector<MatchResult> results;
  for (const auto& c : suite) {
    const MatchResult r = match_pyramid(pyr, c.endpoints, c.start, MatchConfig{});
    ok += (r.converged && r.iterations <= kMaxIter && st::within(r.pose, c.truth, kTx, kTy, st::deg(kTth))) ? 1 : 0;
    results.push_back(r);
  }
  int oracle_ok = 0;
  std::string oracle;
  for (int t = 0; t < kOracleTrials; ++t) {
    const auto& c = suite[static_cast<std::size_t>(t)];
    std::vector<Vec2> sub;
    for (std::size_t i = 0; i < c.endpoints.size(); i += kSubsample) sub.push_back(c.endpoints[i]);
    const PoseSE2 lat = lattice_minimum(pyr.finest(), sub, c.start);
    const bool agree = st::within(lat, results[static_cast<std::size_t>(t)].pose, kTx, kTy, st::deg(kTth)) &&
                       st::within(lat, c.truth, kTx, kTy, st::deg(kTth));
    oracle_ok += agree ? 1 : 0;
    oracle += fmt(" [lattice (%.3f, %.3f, %.2f deg) vs LM (%.3f, %.3f, %.2f deg)]", lat.x, lat.y, lat.theta * 180 / st::kPi,
                  results[static_cast<std::size_t>(t)].pose.x, results[static_cast<std::size_t>(t)].pose.y,
                  results[static_cast<std::size_t>(t)].pose.theta * 180 / st::kPi);
  }
  const bool pass = ok >= static_cast<int>(std::ceil(kRate * kTrials)) && oracle_ok == kOracleTrials;
  return {pass, fmt("%d/%d recovered within (%.2f m, %.2f m, %.1f deg), converged, <= %d iterations; lattice oracle agrees "
                    "on %d/%d",
                    ok, kTrials, kTx, kTy, kTth, kMaxIter, oracle_ok, kOracleTrials) +
                    oracle};
}

// 4. LM with stop criterion vs Gauss-Newton fixed at 3 steps.
Outcome lm_vs_gn() {
  const OccupancyPyramid pyr = st::room_pyramid();
  const auto suite = st::displaced_suite(100, 0.2, 0.1, st::deg(5.0), 42);
  MatchConfig gn;
  gn.solver = Solver::kGaussNewtonFixed;
  gn.max_iterations = 3;
  double e_lm = 0.0, e_gn = 0.0, i_lm = 0.0, i_gn = 0.0, t_lm = 0.0, t_gn = 0.0;
  for (const auto& c : suite) {
    const MatchResult a = match_pyramid(pyr, c.endpoints, c.start, MatchConfig{});
    const MatchResult b = match_pyramid(pyr, c.endpoints, c.start, gn);
    e_lm += a.final_alignment_error;
    e_gn += b.final_alignment_error;
    i_lm += a.iterations;
    i_gn += b.iterations;
    t_lm += a.total_iterations;
    t_gn += b.total_iterations;
  }
  const double n = static_cast<double>(suite.size());
  e_lm /= n, e_gn /= n, i_lm /= n, i_gn /= n, t_lm /= n, t_gn /= n;
  return {e_lm < e_gn && i_lm > i_gn,
          fmt("mean alignment error LM %.3f vs GN-3 %.3f; mean finest-level iterations LM %.3f vs GN-3 %.3f (all levels "
              "%.2f vs %.2f)",
              e_lm, e_gn, i_lm, i_gn, t_lm, t_gn)};
}

// 5. Coarse-to-fine benefit on large displacements.
Outcome pyramid_benefit() {
  constexpr int kTrials = 50;
  constexpr double kRate = 0.9;
  const OccupancyPyramid pyr = st::room_pyramid();
  const World room = make_room_world();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int wins = 0, pyr_ok = 0, fine_ok = 0;
  for (int i = 0; i < kTrials; ++i) {
    const PoseSE2 truth{0.5 * u(rng), 0.5 * u(rng), 0.1 * u(rng)};
    const double dir = st::kPi * u(rng);
    const double sg = u(rng) > 0.0 ? 1.0 : -1.0;
    const PoseSE2 start{truth.x + 0.5 * std::cos(dir), truth.y + 0.5 * std::sin(dir), truth.theta + sg * st::deg(10.0)};
    const auto pts = st::scan_at(room, truth).endpoints();
    const MatchResult p = match_pyramid(pyr, pts, start, MatchConfig{});
    const MatchResult f = match(pyr.finest(), pts, start, MatchConfig{});
    const bool pg = p.converged && st::within(p.pose, truth, 0.02, 0.02, st::deg(0.5));
    const bool fg = f.converged && st::within(f.pose, truth, 0.02, 0.02, st::deg(0.5));
    pyr_ok += pg ? 1 : 0;
    fine_ok += fg ? 1 : 0;
    wins += (pg && !fg) ? 1 : 0;
  }
  return {wins >= static_cast<int>(std::ceil(kRate * kTrials)),
          fmt("pyramid recovers and finest-only fails or caps in %d/%d (pyramid ok %d, finest-only ok %d)", wins, kTrials,
              pyr_ok, fine_ok)};
}

// 6. SLAM drift on the line scenario.
Outcome slam_drift() {
  const auto sc = cli::make_scenario("line");
  SlamSession s(SlamConfig{});
  for (std::size_t i = 0; i < sc.poses.size(); ++i) {
    s.process_frame(*raycast_frame(sc.world, sc.poses[i], LidarModel{}, 0.1 * static_cast<double>(i)));
  }
  const PoseSE2 end = s.trajectory().back().pose;
  const double length = sc.poses.back().x - sc.poses.front().x;
  const double endpoint_err = std::hypot(end.x - length, end.y);
  const double heading = std::abs(end.theta) * 180.0 / st::kPi;
  std::size_t conv = 0;
  for (const auto& r : s.reports()) conv += r.converged ? 1u : 0u;
  return {endpoint_err <= 0.02 * length && heading < 1.0,
          fmt("%zu frames, %.3f m travelled: endpoint error %.5f m (%.3f%%, tol 2%%), heading drift %.4f deg (tol 1), "
              "%zu/%zu converged",
              sc.poses.size(), length, endpoint_err, 100.0 * endpoint_err / length, heading, conv, s.reports().size())};
}

// 7. Ground removal on raycast frames over flat ground plus boxes.
Outcome ground_removal() {
  const auto sc = cli::make_scenario("loop");
  const LidarModel lidar;
  const ScanConfig cfg;
  std::size_t ground = 0, ground_kept = 0, obstacle = 0, obstacle_kept = 0, mixed = 0, frames = 0;
  auto key = [&](const Point3D& p) {
    return std::pair<long, long>{static_cast<long>(std::floor(p.x / cfg.cell_size)),
                                 static_cast<long>(std::floor(p.y / cfg.cell_size))};
  };
  for (std::size_t i = 0; i < sc.poses.size(); i += 25) {
    const auto f = raycast_frame(sc.world, sc.poses[i], lidar, 0.0);
    if (!f) continue;
    ++frames;
    std::map<std::pair<long, long>, std::pair<int, int>> kinds;
    for (const auto& p : f->points) {
      auto& k = kinds[key(p)];
      (std::abs(p.z + lidar.mount_height) < 1e-9 ? k.first : k.second)++;
    }
    const PointCloud3D kept = remove_ground(*f, cfg.cell_size, cfg.h_thres);
    std::set<std::pair<long, long>> kept_cells;
    for (const auto& p : kept.points) kept_cells.insert(key(p));
    for (const auto& p : f->points) {
      const auto k = kinds[key(p)];
      if (k.first > 0 && k.second > 0) {
        ++mixed;  // cell straddles a footprint edge: excluded
        continue;
      }
      const bool in = kept_cells.count(key(p)) > 0;
      if (k.second == 0) {
        ++ground;
        ground_kept += in ? 1u : 0u;
      } else {
        ++obstacle;
        obstacle_kept += in ? 1u : 0u;
      }
    }
  }
  const double removed = 100.0 * static_cast<double>(ground - ground_kept) / static_cast<double>(ground);
  const double retained = 100.0 * static_cast<double>(obstacle_kept) / static_cast<double>(obstacle);
  return {ground_kept == 0 && obstacle_kept == obstacle,
          fmt("%zu frames: ground removed %.3f%% of %zu, obstacle retained %.3f%% of %zu (%zu lost), %zu returns in "
              "straddling cells excluded",
              frames, removed, ground, retained, obstacle, obstacle - obstacle_kept, mixed)};
}

// 8. Steady state of the single-track model.
Outcome vehicle_steady_state() {
  constexpr double kRel = 1e-3;
  VehicleParams p;
  p.V = 3.33;
  double worst = 0.0;
  for (double delta : {0.02, 0.1, 0.3, 0.5}) {
    const double V = p.V;
    const double a11 = -(p.C_r + p.C_f) / (p.m * V);
    const double a12 = -1.0 + (p.C_r * p.l_r - p.C_f * p.l_f) / (p.m * V * V);
    const double a21 = (p.C_r * p.l_r - p.C_f * p.l_f) / p.J;
    const double a22 = -(p.C_r * p.l_r * p.l_r + p.C_f * p.l_f * p.l_f) / (p.J * V);
    const double b1 = p.C_f / (p.m * V) * delta, b2 = p.C_f * p.l_f / p.J * delta;
    const double det = a11 * a22 - a12 * a21;
    const double beta = (-b1 * a22 + a12 * b2) / det, r = (-a11 * b2 + b1 * a21) / det;
    LateralState x = LateralState::Zero();
    const double dt = 0.001;
    for (int i = 0; i < 10000; ++i) {
      const LateralState k1 = lateral_dynamics(x, delta, 0.0, p);
      const LateralState k2 = lateral_dynamics(x + 0.5 * dt * k1, delta, 0.0, p);
      const LateralState k3 = lateral_dynamics(x + 0.5 * dt * k2, delta, 0.0, p);
      const LateralState k4 = lateral_dynamics(x + dt * k3, delta, 0.0, p);
      x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    worst = std::max({worst, std::abs(x(0) - beta) / std::abs(beta), std::abs(x(1) - r) / std::abs(r)});
  }
  return {worst < kRel, fmt("max relative deviation after 10 s: %.2e (tol %.0e)", worst, kRel)};
}

// 9. Path fitting continuity and accuracy.
Outcome path_fitting() {
  constexpr double kJoint = 1e-9, kCircle = 0.005;
  double worst_joint = 0.0;
  int paths = 0;
  auto joints = [&](const PathSpline& s) {
    ++paths;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const Vec2 a = s[i].position(1.0), b = s[i + 1].position(0.0);
      const Vec2 da = s[i].derivative(1.0), db = s[i + 1].derivative(0.0);
      worst_joint = std::max({worst_joint, std::hypot(a.x - b.x, a.y - b.y), std::hypot(da.x - db.x, da.y - db.y)});
    }
  };
  joints(fit_path(make_default_path()));
  joints(fit_path(make_straight_path(100.0)));
  std::vector<Vec2> circle;
  for (int i = 0; i < 200; ++i) {
    const double a = 2.0 * st::kPi * i / 200.0;
    circle.push_back({20.0 * std::cos(a), 20.0 * std::sin(a)});
  }
  const PathSpline cs = fit_path(circle, 10);
  joints(cs);
  double worst_r = 0.0;
  for (const auto& seg : cs.segments()) {
    for (int k = 0; k <= 200; ++k) {
      const Vec2 q = seg.position(k / 200.0);
      worst_r = std::max(worst_r, std::abs(std::hypot(q.x, q.y) - 20.0));
    }
  }
  return {worst_joint < kJoint && worst_r < kCircle,
          fmt("%d paths, max joint C0/C1 gap %.2e (tol %.0e); circle max radial deviation %.4f m (tol %.3f)", paths,
              worst_joint, kJoint, worst_r, kCircle)};
}

// 10. Closed loop on the default world, truth vs SLAM localization.
Outcome closed_loop() {
  SimRun run;
  run.world = make_default_world();
  run.waypoints = make_default_path();
  run.mode = LocalizationMode::kTruth;
  const RunReport truth = run_closed_loop(run);
  run.mode = LocalizationMode::kSlam;
  const RunReport slam = run_closed_loop(run);
  const bool pass = !truth.failed && !slam.failed && truth.completed && slam.completed && truth.rmse < 0.1 &&
                    std::abs(slam.rmse - truth.rmse) <= 0.15;
  return {pass, fmt("truth RMSE %.4f m (max %.3f, %s), SLAM RMSE %.4f m (max %.3f, %s, %zu/%zu frames converged); "
                    "difference %.4f m (tol 0.15)",
                    truth.rmse, truth.max_error, truth.completed ? "completed" : "not completed", slam.rmse,
                    slam.max_error, slam.completed ? "completed" : "not completed", slam.frames_converged, slam.frames,
                    std::abs(slam.rmse - truth.rmse))};
}

std::map<std::string, std::string> dir_contents(const fs::path& d) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(d)) out[e.path().filename().string()] = st::slurp(e.path());
  return out;
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "shuttle-slam");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

// 11. Repeated invocations are bit-identical.
Outcome determinism() {
  const fs::path dir = st::scratch_dir("acceptance_determinism");
  const std::string log = (dir / "room.log").string();
  if (invoke({"gen", "--scenario", "room", "--frames", "40", "--noise", "0.01", "--out", log}) != cli::kExitOk) {
    return {false, "gen failed"};
  }
  std::vector<int> codes;
  for (const char* run : {"slam_a", "slam_b"}) codes.push_back(invoke({"slam", "--frames", log, "--out", (dir / run).string()}));
  for (const char* run : {"sim_a", "sim_b"}) {
    codes.push_back(invoke({"sim", "--mode", "slam", "--noise", "0.01", "--seed", "3", "--duration", "30", "--out",
                            (dir / run).string()}));
  }
  const auto sa = dir_contents(dir / "slam_a"), sb = dir_contents(dir / "slam_b");
  const auto ma = dir_contents(dir / "sim_a"), mb = dir_contents(dir / "sim_b");
  std::size_t bytes = 0;
  for (const auto& [k, v] : sa) bytes += v.size();
  for (const auto& [k, v] : ma) bytes += v.size();
  const bool codes_ok = codes[0] != cli::kExitInput && codes[0] == codes[1] && codes[2] == cli::kExitOk && codes[3] == cli::kExitOk;
  return {codes_ok && sa == sb && ma == mb && !sa.empty() && !ma.empty(),
          fmt("slam: %zu files %s, sim: %zu files %s, %zu bytes compared, exit codes %d/%d/%d/%d", sa.size(),
              sa == sb ? "identical" : "DIFFER", ma.size(), ma == mb ? "identical" : "DIFFER", bytes, codes[0], codes[1],
              codes[2], codes[3])};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "interpolation exactness", 1.0, interpolation_exactness},
      {2, "jacobian correctness", 10.0, jacobian_correctness},
      {3, "pose recovery", 120.0, pose_recovery},
      {4, "LM vs GN-fixed-3", 300.0, lm_vs_gn},
      {5, "pyramid benefit", 120.0, pyramid_benefit},
      {6, "SLAM drift", 60.0, slam_drift},
      {7, "ground removal", 30.0, ground_removal},
      {8, "vehicle steady state", 5.0, vehicle_steady_state},
      {9, "path fitting", 5.0, path_fitting},
      {10, "closed-loop comparison", 300.0, closed_loop},
      {11, "determinism", 120.0, determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("%s criterion %2d %-24s %s [%.2f s / %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed;
}
