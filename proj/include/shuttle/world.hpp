#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "shuttle/pose.hpp"
#include "shuttle/scan.hpp"

namespace shuttle {

/// Vertical prism over a convex footprint (counter-clockwise vertices).
struct Obstacle {
  std::vector<Vec2> footprint;
  double height = 0.0;

  /// Axis-aligned box centred on (cx, cy), `w` along x and `h` along y.
  static Obstacle box(double cx, double cy, double w, double h, double height);
  /// Rectangle of `thickness` centred on the segment (x1, y1)-(x2, y2).
  static Obstacle wall(double x1, double y1, double x2, double y2, double thickness, double height);

  bool contains(Vec2 p) const;
};

/// Flat ground at z = 0 plus prism obstacles.
struct World {
  std::vector<Obstacle> obstacles;

  bool inside_obstacle(Vec2 p) const;
  /// Axis-aligned bounds of all obstacle footprints.
  Vec2 min_corner() const;
  Vec2 max_corner() const;
};

/// World file: one obstacle per line, `BOX cx cy w h height` or
/// `WALL x1 y1 x2 y2 thickness height`; `#` starts a comment.
World parse_world(const std::string& text);
World read_world_file(const std::string& path);
void write_world_file(const std::string& path, const World& world);

struct LidarModel {
  int channels = 16;
  double vertical_fov = 30.0 * std::numbers::pi / 180.0;  // total, symmetric about horizontal
  int azimuth_bins = 1440;
  double max_range = 80.0;
  double noise_sigma = 0.0;  // additive Gaussian range noise [m]
  double mount_height = 1.8;

  /// Channel elevations, evenly spread over the FOV; a single channel is horizontal.
  std::vector<double> elevations() const;
  /// Sensor-frame azimuth of bin k: -pi + k * 2pi / azimuth_bins.
  double azimuth(int k) const;
  void validate() const;
};

/// Casts every (elevation, azimuth) ray from the sensor at `pose` (mount height from the
/// model) and returns the nearest hits in the sensor frame (z relative to the sensor).
/// Rays without a hit inside max_range produce no point. Returns nullopt if the sensor
/// stands inside an obstacle. `rng` is required only when noise_sigma > 0.
std::optional<PointCloud3D> raycast_frame(const World& world, const PoseSE2& pose, const LidarModel& lidar,
                                          double timestamp, std::mt19937_64* rng = nullptr);

/// Distance along a single 3D ray to the nearest surface; nullopt if none.
std::optional<double> raycast_range(const World& world, Vec2 origin, double z0, double azimuth, double elevation);

}  // namespace shuttle
