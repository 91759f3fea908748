#pragma once

#include <cstddef>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shuttle/pose.hpp"

namespace shuttle {

struct Point3D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3D&, const Point3D&) = default;
};

/// One LIDAR sweep in the sensor frame (x-y ground plane, z up).
struct PointCloud3D {
  double timestamp = 0.0;
  std::vector<Point3D> points;
};

/// Thrown when a frame cannot be used, e.g. because it holds a non-finite coordinate.
class FrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScanConfig {
  double cell_size = 0.2;   // height-grid cell edge [m]
  double h_thres = 0.3;     // minimum z spread for a cell to count as obstacle [m]
  double bin_width = 0.25 * std::numbers::pi / 180.0;  // [rad], 1440 bins
  double max_range = 80.0;  // [m]
};

/// Per-cell height statistics of a cloud on the x-y plane.
///
/// Cells are half-open: a point belongs to cell (floor(x / cell), floor(y / cell)).
/// The grid is sized to the bounding box of the cloud.
class HeightGrid {
 public:
  struct Cell {
    double z_min = 0.0;
    double z_max = 0.0;
    std::vector<std::size_t> points;
  };

  HeightGrid(const PointCloud3D& cloud, double cell_size);

  double cell_size() const { return cell_size_; }
  long min_ix() const { return min_ix_; }
  long min_iy() const { return min_iy_; }
  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }

  /// Cell holding point `i` of the source cloud.
  const Cell& cell_of(std::size_t i) const { return cells_[cell_index_[i]]; }
  /// Cell by absolute integer coordinates, nullptr if outside the grid or empty.
  const Cell* find(long ix, long iy) const;

 private:
  double cell_size_;
  long min_ix_ = 0;
  long min_iy_ = 0;
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<Cell> cells_;
  std::vector<std::size_t> cell_index_;
  std::vector<std::size_t> slot_;
};

/// Keeps exactly the points whose height-grid cell has z_max - z_min >= h_thres.
/// Throws FrameError on non-finite coordinates.
PointCloud3D remove_ground(const PointCloud3D& cloud, double cell_size, double h_thres);

/// Angularly binned planar scan. Bin i is centred on bearing -pi + i * bin_width and
/// covers [-pi + (i - 0.5) w, -pi + (i + 0.5) w), wrapping at the seam.
class PlanarScan {
 public:
  struct Beam {
    double range = 0.0;
    double bearing = 0.0;  // exact bearing of the point that won the bin
  };

  PlanarScan() = default;
  PlanarScan(double timestamp, double bin_width);

  double timestamp() const { return timestamp_; }
  double bin_width() const { return bin_width_; }
  std::size_t bin_count() const { return bins_.size(); }

  std::size_t bin_of(double bearing) const;
  double bin_bearing(std::size_t bin) const;

  const std::optional<Beam>& operator[](std::size_t bin) const { return bins_[bin]; }
  /// Keeps the shorter of the current and offered range for the bin of `bearing`.
  void offer(double bearing, double range);

  std::size_t beam_count() const;
  bool empty() const { return beam_count() == 0; }

  /// End points of all non-empty beams in the sensor frame, in bin order.
  std::vector<Vec2> endpoints() const;

 private:
  double timestamp_ = 0.0;
  double bin_width_ = 0.0;
  std::vector<std::optional<Beam>> bins_;
};

/// Statistics from the last projection, for diagnostics.
struct ProjectionStats {
  std::size_t skipped_origin = 0;
  std::size_t dropped_range = 0;
};

/// Projects a (ground-filtered) cloud to a planar scan keeping the minimum range per bin.
/// Points at the origin are skipped, points beyond max_range dropped.
PlanarScan project_to_scan(const PointCloud3D& cloud, double bin_width, double max_range,
                           ProjectionStats* stats = nullptr);

// Frame log: "FRAME <timestamp_s> <n_points>" followed by n_points lines "x y z".

/// Thrown on malformed frame logs; carries the 1-based line number.
class LogParseError : public std::runtime_error {
 public:
  LogParseError(std::size_t line, const std::string& detail, const std::string& source = {});
  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

void write_frame(std::ostream& os, const PointCloud3D& cloud);
std::vector<PointCloud3D> read_frames(std::istream& is);
std::vector<PointCloud3D> read_frame_file(const std::string& path);
void write_frame_file(const std::string& path, const std::vector<PointCloud3D>& frames);

}  // namespace shuttle
