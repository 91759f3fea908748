#include "shuttle/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "shuttle/text.hpp"

namespace shuttle {

Obstacle Obstacle::box(double cx, double cy, double w, double h, double height) {
  if (!(w > 0.0) || !(h > 0.0) || !(height > 0.0)) throw std::invalid_argument("box dimensions must be positive");
  const double hw = w / 2.0;
  const double hh = h / 2.0;
  return {{{cx - hw, cy - hh}, {cx + hw, cy - hh}, {cx + hw, cy + hh}, {cx - hw, cy + hh}}, height};
}

Obstacle Obstacle::wall(double x1, double y1, double x2, double y2, double thickness, double height) {
  const double len = std::hypot(x2 - x1, y2 - y1);
  if (!(len > 0.0) || !(thickness > 0.0) || !(height > 0.0)) throw std::invalid_argument("degenerate wall");
  const double nx = -(y2 - y1) / len * thickness / 2.0;
  const double ny = (x2 - x1) / len * thickness / 2.0;
  return {{{x1 - nx, y1 - ny}, {x2 - nx, y2 - ny}, {x2 + nx, y2 + ny}, {x1 + nx, y1 + ny}}, height};
}

bool Obstacle::contains(Vec2 p) const {
  const std::size_t n = footprint.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = footprint[i];
    const Vec2 b = footprint[(i + 1) % n];
    if ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) < 0.0) return false;
  }
  return true;
}

bool World::inside_obstacle(Vec2 p) const {
  return std::any_of(obstacles.begin(), obstacles.end(), [&](const Obstacle& o) { return o.contains(p); });
}

Vec2 World::min_corner() const {
  Vec2 m{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (const auto& o : obstacles)
    for (const auto& v : o.footprint) m = {std::min(m.x, v.x), std::min(m.y, v.y)};
  return m;
}

Vec2 World::max_corner() const {
  Vec2 m{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& o : obstacles)
    for (const auto& v : o.footprint) m = {std::max(m.x, v.x), std::max(m.y, v.y)};
  return m;
}

World parse_world(const std::string& content) {
  World w;
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto tok = text::split_ws(line);
    if (tok.empty()) continue;
    std::vector<double> v(tok.size() - 1);
    for (std::size_t i = 1; i < tok.size(); ++i) {
      if (!text::parse_double(tok[i], v[i - 1]) || !std::isfinite(v[i - 1])) {
        throw LogParseError(lineno, "bad number '" + std::string(tok[i]) + "'");
      }
    }
    try {
      if (tok[0] == "BOX" && v.size() == 5) {
        w.obstacles.push_back(Obstacle::box(v[0], v[1], v[2], v[3], v[4]));
      } else if (tok[0] == "WALL" && v.size() == 6) {
        w.obstacles.push_back(Obstacle::wall(v[0], v[1], v[2], v[3], v[4], v[5]));
      } else {
        throw LogParseError(lineno, "expected 'BOX cx cy w h height' or 'WALL x1 y1 x2 y2 thickness height'");
      }
    } catch (const std::invalid_argument& e) {
      throw LogParseError(lineno, e.what());
    }
  }
  return w;
}

World read_world_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open world file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_world(ss.str());
  } catch (const LogParseError& e) {
    throw LogParseError(e.line(), e.detail(), path);
  }
}

void write_world_file(const std::string& path, const World& world) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write world file '" + path + "'");
  // Every obstacle is a 4-gon; emit it as a wall along its centre line.
  for (const auto& o : world.obstacles) {
    const auto& f = o.footprint;
    if (f.size() != 4) throw std::runtime_error("only rectangular obstacles can be written");
    const Vec2 a{(f[0].x + f[3].x) / 2.0, (f[0].y + f[3].y) / 2.0};
    const Vec2 b{(f[1].x + f[2].x) / 2.0, (f[1].y + f[2].y) / 2.0};
    const double thickness = std::hypot(f[3].x - f[0].x, f[3].y - f[0].y);
    out << "WALL " << text::num(a.x) << ' ' << text::num(a.y) << ' ' << text::num(b.x) << ' ' << text::num(b.y) << ' '
        << text::num(thickness) << ' ' << text::num(o.height) << '\n';
  }
}

std::vector<double> LidarModel::elevations() const {
  std::vector<double> e(static_cast<std::size_t>(channels));
  if (channels == 1) {
    e[0] = 0.0;
    return e;
  }
  for (int i = 0; i < channels; ++i) {
    e[static_cast<std::size_t>(i)] = -vertical_fov / 2.0 + vertical_fov * static_cast<double>(i) / (channels - 1);
  }
  return e;
}

double LidarModel::azimuth(int k) const {
  return -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(azimuth_bins);
}

void LidarModel::validate() const {
  if (channels < 1) throw std::invalid_argument("lidar needs at least one channel");
  if (azimuth_bins < 1) throw std::invalid_argument("lidar needs at least one azimuth bin");
  if (!(max_range > 0.0)) throw std::invalid_argument("lidar max range must be positive");
  if (!(vertical_fov >= 0.0 && vertical_fov < std::numbers::pi)) throw std::invalid_argument("bad vertical FOV");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be non-negative");
  if (!(mount_height > 0.0)) throw std::invalid_argument("mount height must be positive");
}

namespace {

// Horizontal distance along direction d from o to the segment a-b, if hit in front.
std::optional<double> ray_segment(Vec2 o, Vec2 d, Vec2 a, Vec2 b) {
  const Vec2 e{b.x - a.x, b.y - a.y};
  const double denom = d.x * e.y - d.y * e.x;
  if (denom == 0.0) return std::nullopt;
  const Vec2 ao{a.x - o.x, a.y - o.y};
  const double t = (ao.x * e.y - ao.y * e.x) / denom;
  const double u = (ao.x * d.y - ao.y * d.x) / denom;
  if (t <= 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

}  // namespace

std::optional<double> raycast_range(const World& world, Vec2 origin, double z0, double azimuth, double elevation) {
  const Vec2 d{std::cos(azimuth), std::sin(azimuth)};
  const double ce = std::cos(elevation);
  const double te = std::tan(elevation);
  double best = std::numeric_limits<double>::infinity();  // horizontal distance

  if (elevation < 0.0) best = z0 / -te;  // ground plane
  for (const auto& o : world.obstacles) {
    const std::size_t n = o.footprint.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto t = ray_segment(origin, d, o.footprint[i], o.footprint[(i + 1) % n]);
      if (!t || *t >= best) continue;
      const double z = z0 + *t * te;
      if (z >= 0.0 && z <= o.height) best = *t;
    }
    if (elevation < 0.0 && z0 > o.height) {  // roof
      const double t = (o.height - z0) / te;
      if (t < best && o.contains({origin.x + t * d.x, origin.y + t * d.y})) best = t;
    }
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best / ce;
}

std::optional<PointCloud3D> raycast_frame(const World& world, const PoseSE2& pose, const LidarModel& lidar,
                                          double timestamp, std::mt19937_64* rng) {
  lidar.validate();
  if (!pose.finite()) throw std::invalid_argument("sensor pose must be finite");
  const Vec2 origin{pose.x, pose.y};
  if (world.inside_obstacle(origin)) return std::nullopt;
  if (lidar.noise_sigma > 0.0 && rng == nullptr) throw std::invalid_argument("noisy lidar needs a random generator");
  std::normal_distribution<double> noise(0.0, lidar.noise_sigma);

  PointCloud3D cloud;
  cloud.timestamp = timestamp;
  const auto elev = lidar.elevations();
  cloud.points.reserve(elev.size() * static_cast<std::size_t>(lidar.azimuth_bins) / 2);
  for (const double el : elev) {
    const double ce = std::cos(el);
    const double se = std::sin(el);
    for (int k = 0; k < lidar.azimuth_bins; ++k) {
      const double az = lidar.azimuth(k);
      auto range = raycast_range(world, origin, lidar.mount_height, pose.theta + az, el);
      if (!range || *range > lidar.max_range) continue;
      double r = *range;
      if (lidar.noise_sigma > 0.0) r = std::max(0.0, r + noise(*rng));
      cloud.points.push_back({r * ce * std::cos(az), r * ce * std::sin(az), r * se});
    }
  }
  return cloud;
}

}  // namespace shuttle
