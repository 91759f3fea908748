#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "shuttle/grid.hpp"
#include "shuttle/matcher.hpp"
#include "shuttle/pose.hpp"
#include "shuttle/scan.hpp"

namespace shuttle {

struct SlamConfig {
  ScanConfig scan;
  GridConfig grid;
  MatchConfig match;
  PoseSE2 origin;
  std::optional<Vec2> map_center;  // defaults to the origin position
  double max_translation = 1.0;  // per-frame motion bound [m]
  double max_rotation = 0.5;     // [rad]

  /// Throws std::invalid_argument; the map must span at least twice the sensor range.
  void validate() const;
};

struct FrameReport {
  double timestamp = 0.0;
  PoseSE2 pose;
  bool converged = false;
  MatchStatus status = MatchStatus::kConverged;
  double alignment_error = 0.0;
  int iterations = 0;        // finest level
  int total_iterations = 0;  // all levels
  std::size_t raw_points = 0;
  std::size_t kept_points = 0;
  std::size_t projected_points = 0;
  bool map_updated = false;
  bool motion_rejected = false;
};

struct TrajectoryEntry {
  double timestamp = 0.0;
  PoseSE2 pose;
  bool converged = false;
  double align_error = 0.0;
  int iterations = 0;
};

/// Online 2D SLAM: ground removal, projection, coarse-to-fine matching against the
/// built-up map from the previous pose, then a map update at the new pose.
///
/// Single writer. Frames that fail to match (no overlap, singular system, motion bound
/// exceeded) hold the previous pose; any frame that does not converge leaves the map untouched.
class SlamSession {
 public:
  explicit SlamSession(SlamConfig cfg);

  /// Throws FrameError for non-increasing timestamps or non-finite points.
  FrameReport process_frame(const PointCloud3D& cloud);

  const SlamConfig& config() const { return cfg_; }
  const PoseSE2& pose() const { return pose_; }
  const OccupancyPyramid& pyramid() const { return pyramid_; }
  const std::vector<TrajectoryEntry>& trajectory() const { return trajectory_; }
  const std::vector<FrameReport>& reports() const { return reports_; }

 private:
  SlamConfig cfg_;
  OccupancyPyramid pyramid_;
  PoseSE2 pose_;
  std::vector<TrajectoryEntry> trajectory_;
  std::vector<FrameReport> reports_;
};

/// Columns: timestamp_s,x_m,y_m,theta_rad,converged,align_error,iterations
void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryEntry>& trajectory);
std::vector<TrajectoryEntry> read_trajectory_csv(const std::string& path);
void write_frame_reports_csv(const std::string& path, const std::vector<FrameReport>& reports);

/// Writes trajectory.csv, frames.csv and map_level<k>.pgm/.txt into `dir` (created if missing).
void export_session(const SlamSession& session, const std::string& dir);

}  // namespace shuttle
