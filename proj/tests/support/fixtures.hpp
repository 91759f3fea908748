#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "shuttle/grid.hpp"
#include "shuttle/matcher.hpp"
#include "shuttle/scan.hpp"
#include "shuttle/sim.hpp"
#include "shuttle/world.hpp"

namespace shuttle::testing {

inline constexpr double kPi = std::numbers::pi;
inline double deg(double d) { return d * kPi / 180.0; }

/// Raycast, ground removal with defaults and projection: the scan the SLAM front end sees.
inline PlanarScan scan_at(const World& world, const PoseSE2& pose, const LidarModel& lidar = {}) {
  const auto cloud = raycast_frame(world, pose, lidar, 0.0);
  const ScanConfig sc;
  return project_to_scan(remove_ground(*cloud, sc.cell_size, sc.h_thres), sc.bin_width, sc.max_range);
}

/// Five-level pyramid of the room seeded with one scan from the origin.
inline OccupancyPyramid room_pyramid(int levels = 5) {
  GridConfig gc;
  gc.size = 24.0;
  gc.levels = levels;
  OccupancyPyramid pyr(gc, {0.0, 0.0});
  pyr.update({0.0, 0.0, 0.0}, scan_at(make_room_world(), {0.0, 0.0, 0.0}));
  return pyr;
}

/// Truth pose near the room centre and a start estimate displaced by (dx, dy, dtheta)
/// with random signs.
struct DisplacedCase {
  PoseSE2 truth;
  PoseSE2 start;
  std::vector<Vec2> endpoints;
};

inline std::vector<DisplacedCase> displaced_suite(int n, double dx, double dy, double dtheta, std::uint64_t seed) {
  const World room = make_room_world();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto sign = [&] { return u(rng) > 0.0 ? 1.0 : -1.0; };
  std::vector<DisplacedCase> out;
  for (int i = 0; i < n; ++i) {
    DisplacedCase c;
    c.truth = {0.5 * u(rng), 0.5 * u(rng), 0.1 * u(rng)};
    c.endpoints = scan_at(room, c.truth).endpoints();
    c.start = {c.truth.x + sign() * dx, c.truth.y + sign() * dy, c.truth.theta + sign() * dtheta};
    out.push_back(std::move(c));
  }
  return out;
}

inline bool within(const PoseSE2& a, const PoseSE2& b, double tx, double ty, double tth) {
  return std::abs(a.x - b.x) <= tx && std::abs(a.y - b.y) <= ty && std::abs(wrap_angle(a.theta - b.theta)) <= tth;
}

/// Distance from p to an axis-aligned obstacle footprint, 0 inside.
inline double distance_to_footprint(const Obstacle& o, Vec2 p) {
  double x0 = o.footprint[0].x, x1 = x0, y0 = o.footprint[0].y, y1 = y0;
  for (const Vec2& v : o.footprint) {
    x0 = std::min(x0, v.x);
    x1 = std::max(x1, v.x);
    y0 = std::min(y0, v.y);
    y1 = std::max(y1, v.y);
  }
  const double dx = std::max({x0 - p.x, 0.0, p.x - x1});
  const double dy = std::max({y0 - p.y, 0.0, p.y - y1});
  return std::hypot(dx, dy);
}

inline double distance_to_world(const World& w, Vec2 p) {
  double d = std::numeric_limits<double>::infinity();
  for (const Obstacle& o : w.obstacles) d = std::min(d, distance_to_footprint(o, p));
  return d;
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("shuttle_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace shuttle::testing
