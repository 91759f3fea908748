#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shuttle/pose.hpp"
#include "shuttle/slam.hpp"
#include "shuttle/vehicle.hpp"
#include "shuttle/world.hpp"

namespace shuttle {

/// 60 x 40 m lot centred on the origin: perimeter walls, a central building block,
/// scattered boxes on the west side and an open field to the east.
World make_default_world();

/// Closed loop around the building: two 32 m straights joined by 180 degree turns
/// with 4 m clothoid transitions and a 7 m apex radius. Starts at the west end of the
/// southern straight heading +x, waypoints about every 0.5 m, last point equals the first.
/// The interval count is a multiple of 9 so 10-point segments tile the path exactly.
std::vector<Vec2> make_default_path();

/// Minimum radius of the default path's turns.
inline constexpr double kDefaultApexRadius = 7.0;

/// 10 x 10 m room (inner faces at +-5 m) with two boxes, centred on the origin.
World make_room_world();

/// Corridor along +x from -10 to length + 10 with side walls at y = +-5 and pillars.
World make_corridor_world(double length);

/// Straight line from the origin along +x; spacing is adjusted so the interval count is a multiple of 9.
std::vector<Vec2> make_straight_path(double length, double spacing = 0.5);

enum class LocalizationMode { kSlam, kTruth };

std::string to_string(LocalizationMode m);
std::optional<LocalizationMode> parse_mode(const std::string& s);

struct SimRun {
  World world;
  LidarModel lidar;
  VehicleParams vehicle;
  PidConfig pid;
  SlamConfig slam;  // origin and map centre are set by the run
  std::vector<Vec2> waypoints;
  int seg_len = 10;
  LocalizationMode mode = LocalizationMode::kTruth;
  double duration = 300.0;  // [s]; the run also stops at the path end
  std::uint64_t seed = 1;
  double dt = 0.01;          // control and integration step [s]
  int steps_per_frame = 10;  // LIDAR period in control steps
  double speed = 12.0 / 3.6; // commanded speed [m/s]
  double speed_tau = 0.5;    // longitudinal lag [s]
  double initial_speed = 12.0 / 3.6;
  double off_path_limit = 10.0;  // [m]
  double bounds_margin = 5.0;    // allowed excursion beyond the world's obstacle bounds [m]

  void validate() const;
};

struct RunSample {
  double t = 0.0;
  PoseSE2 truth;
  PoseSE2 estimate;
  double h = 0.0;        // truth lateral offset [m]
  double y = 0.0;        // preview error seen by the controller [m]
  double delta_f = 0.0;  // filtered steering command [rad]
};

struct RunReport {
  std::vector<RunSample> samples;
  double rmse = 0.0;       // truth lateral error over all samples [m]
  double max_error = 0.0;  // max |h| [m]
  bool failed = false;
  std::string failure_reason;
  bool completed = false;  // reached the path end
  std::size_t frames = 0;
  std::size_t frames_converged = 0;
  double path_rms = 0.0;   // spline fit residual [m]
};

/// Fixed-step closed loop: vehicle -> LIDAR -> localization -> PID -> command filter -> vehicle.
/// The controller holds the latest SLAM pose between frames. Throws std::invalid_argument
/// for an invalid configuration or a start pose off the path.
RunReport run_closed_loop(const SimRun& run);

/// Columns: t,X_true,Y_true,psi_true,X_est,Y_est,psi_est,h,y,delta_f
void write_run_csv(const std::string& path, const RunReport& report);
std::vector<RunSample> read_run_csv(const std::string& path);
/// `key = value` lines: rmse_m, max_error_m, failed, reason, completed, frames, frames_converged.
void write_run_summary(const std::string& path, const RunReport& report);

}  // namespace shuttle
