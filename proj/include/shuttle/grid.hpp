#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shuttle/pose.hpp"
#include "shuttle/scan.hpp"

namespace shuttle {

/// Additive log-odds sensor model.
struct LogOddsModel {
  double l_hit = 4.0;
  double l_miss = -0.4;
  double l_min = -4.0;
  double l_max = 4.0;
};

struct GridConfig {
  double resolution = 0.05;  // finest level [m/cell]
  int levels = 5;
  double size = 160.0;       // square world extent [m], centred on the session origin
  double occupied_threshold = 0.5;
  LogOddsModel model;
};

struct InterpResult {
  double value = 0.5;
  Vec2 gradient;  // [1/m]
};

struct CellIndex {
  long x = 0;
  long y = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Probabilistic occupancy grid storing per-cell log-odds.
///
/// Cell (i, j) spans [origin + i*res, origin + (i+1)*res) and its value is sampled at the
/// cell centre; bilinear interpolation runs between neighbouring centres.
class OccupancyGrid {
 public:
  OccupancyGrid(double resolution, Vec2 origin, std::size_t width, std::size_t height,
                LogOddsModel model = {});

  double resolution() const { return resolution_; }
  Vec2 origin() const { return origin_; }
  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  const LogOddsModel& model() const { return model_; }

  bool contains(CellIndex c) const {
    return c.x >= 0 && c.y >= 0 && static_cast<std::size_t>(c.x) < width_ && static_cast<std::size_t>(c.y) < height_;
  }
  CellIndex cell_of(Vec2 p) const;
  Vec2 cell_center(CellIndex c) const;

  double log_odds(CellIndex c) const { return log_odds_[flat(c)]; }
  /// Stored value is clamped to [l_min, l_max].
  void set_log_odds(CellIndex c, double l);
  /// M in [0, 1]; unknown cells report 0.5.
  double probability(CellIndex c) const;
  void set_probability(CellIndex c, double p);

  /// Bilinear occupancy value and gradient; nullopt when the four neighbouring centres are
  /// not all inside the grid.
  std::optional<InterpResult> interpolate(Vec2 p) const;

  /// Ray-traces every beam from the sensor: traversed cells take a miss, the end cell a hit.
  /// Within one scan a cell is updated at most once and a hit wins over a miss.
  /// Beams leaving the grid are truncated at the boundary.
  void update_with_scan(const PoseSE2& pose, const PlanarScan& scan);
  void update_with_endpoints(Vec2 sensor, std::span<const Vec2> world_endpoints);

  /// Cells with M > threshold.
  std::vector<CellIndex> occupied_cells(double threshold = 0.5) const;
  std::uint64_t fingerprint() const;

  const std::vector<double>& raw() const { return log_odds_; }

 private:
  std::size_t flat(CellIndex c) const { return static_cast<std::size_t>(c.y) * width_ + static_cast<std::size_t>(c.x); }
  void trace(Vec2 from, Vec2 to, bool end_is_hit, std::vector<std::size_t>& touched);

  double resolution_;
  Vec2 origin_;
  std::size_t width_;
  std::size_t height_;
  LogOddsModel model_;
  std::vector<double> log_odds_;
  std::vector<std::uint8_t> mark_;  // scratch for one update: 0 untouched, 1 miss, 2 hit
};

/// Grid levels sharing one world origin, level k+1 at twice the cell size of level k.
/// Levels are updated independently from the same pose estimates, never down-sampled.
class OccupancyPyramid {
 public:
  /// Square extent of at least `size` metres around `center`, rounded up so every level has
  /// a whole number of cells; `center` lies on a finest-level cell centre.
  OccupancyPyramid(const GridConfig& cfg, Vec2 center);

  std::size_t level_count() const { return levels_.size(); }
  const OccupancyGrid& level(std::size_t k) const { return levels_[k]; }
  OccupancyGrid& level(std::size_t k) { return levels_[k]; }
  const OccupancyGrid& finest() const { return levels_.front(); }
  const OccupancyGrid& coarsest() const { return levels_.back(); }

  void update(const PoseSE2& pose, const PlanarScan& scan);

 private:
  std::vector<OccupancyGrid> levels_;
};

/// Writes a plain-text (P2) graymap, gray = round(255 * (1 - M)), first row = largest y,
/// plus a `<stem>.txt` sidecar with resolution, origin and occupancy threshold.
void export_pgm(const OccupancyGrid& grid, const std::string& pgm_path, double threshold = 0.5);

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  int max_value = 255;
  std::vector<int> pixels;  // row-major, first row on top
};
GrayImage read_pgm(const std::string& path);

}  // namespace shuttle
