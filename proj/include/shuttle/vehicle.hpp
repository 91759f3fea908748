#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shuttle/pose.hpp"

namespace shuttle {

/// Single-track model parameters. Defaults describe the test shuttle.
struct VehicleParams {
  double m = 2000.0;      // mass [kg]
  double J = 3728.0;      // yaw inertia [kg m^2]
  double l_f = 1.3008;    // CG to front axle [m]
  double l_r = 1.54527;   // CG to rear axle [m]
  double C_f = 1.9e5;     // front cornering stiffness [N/rad]
  double C_r = 5.0e5;     // rear cornering stiffness [N/rad]
  double l_s = 2.0;       // preview distance [m]
  double V = 12.0 / 3.6;  // scheduling speed [m/s]

  double wheelbase() const { return l_f + l_r; }
  /// Throws std::invalid_argument unless every field is strictly positive and finite.
  void validate() const;
};

/// State order: side slip beta [rad], yaw rate r [rad/s], heading error dpsi [rad],
/// preview lateral error y [m].
using LateralState = Eigen::Vector4d;

struct LateralModel {
  Eigen::Matrix4d A;
  Eigen::Matrix<double, 4, 2> B;  // inputs (delta_f, rho_ref)
};

/// Builds A and B at params.V. Throws std::invalid_argument when V <= 0.
LateralModel lateral_model(const VehicleParams& p);

/// A x + B (delta_f, rho_ref).
LateralState lateral_dynamics(const LateralState& x, double delta_f, double rho_ref, const VehicleParams& p);

struct SteadyState {
  double beta = 0.0;
  double r = 0.0;
};

/// Equilibrium of the (beta, r) subsystem under a constant steering angle.
SteadyState steady_state(const VehicleParams& p, double delta_f);

/// Radius of the steady circle driven at params.V with steering angle delta_f.
double turn_radius(const VehicleParams& p, double delta_f);

/// Piecewise cubic X(l) = a l^3 + b l^2 + c l + d with l in [0, 1].
struct CubicSegment {
  double ax = 0, bx = 0, cx = 0, dx = 0;
  double ay = 0, by = 0, cy = 0, dy = 0;

  Vec2 position(double l) const;
  Vec2 derivative(double l) const;
  Vec2 second_derivative(double l) const;
};

class PathSpline {
 public:
  PathSpline() = default;
  PathSpline(std::vector<CubicSegment> segments, double residual_rms, double max_residual);

  const std::vector<CubicSegment>& segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  const CubicSegment& operator[](std::size_t i) const { return segments_[i]; }
  Vec2 start() const { return segments_.front().position(0.0); }
  Vec2 end() const { return segments_.back().position(1.0); }
  double residual_rms() const { return residual_rms_; }
  double max_residual() const { return max_residual_; }

  /// Arc length of segment i up to parameter l (Gauss-Legendre quadrature).
  double segment_length(std::size_t i, double l = 1.0) const;
  double length() const;

  /// Position and tangent heading at arc length s from the start, clamped to the path.
  PoseSE2 at_distance(double s) const;

 private:
  std::vector<CubicSegment> segments_;
  double residual_rms_ = 0.0;
  double max_residual_ = 0.0;
};

/// Least-squares cubic fit with exact position and derivative continuity at the joints.
/// Consecutive segments share their boundary waypoint, so each segment spans seg_len
/// waypoints; a short tail is absorbed by the last segment. Throws std::invalid_argument
/// for fewer than two segments' worth of points, non-finite points, or a segment whose
/// points coincide.
PathSpline fit_path(std::span<const Vec2> waypoints, int seg_len = 10);

struct PathError {
  double h = 0.0;     // signed lateral offset, positive left of the path [m]
  double dpsi = 0.0;  // heading minus path tangent heading, wrapped [rad]
  double y = 0.0;     // h + l_s sin(dpsi) [m]
  std::size_t segment = 0;
  double lambda = 0.0;
  Vec2 nearest;
  double distance = 0.0;
  bool past_end = false;  // nearest point is the path end and the pose lies beyond it
};

/// Nearest-point lateral error. Searches all segments, or only a window around
/// `hint` when given. Returns nullopt when the nearest point is farther than `neighborhood`.
std::optional<PathError> path_error(const PathSpline& path, const PoseSE2& pose, double l_s,
                                    std::optional<std::size_t> hint = std::nullopt, double neighborhood = 10.0);

struct PidConfig {
  double kp = 1.5;              // [rad/m]
  double ki = 1.5;              // [rad/(m s)]
  double kd = 0.1;              // [rad s/m]
  double delta_max = 0.5;       // [rad]
  double integral_limit = 0.5;  // clamp on the integral contribution [rad]

  void validate() const;
};

/// PID on -y with a clamped integral contribution and saturated output.
class PidController {
 public:
  explicit PidController(PidConfig cfg = {});

  /// Throws std::invalid_argument when dt <= 0.
  double step(double y, double dt);
  void reset();

  const PidConfig& config() const { return cfg_; }
  double integral() const { return integral_; }

 private:
  PidConfig cfg_;
  double integral_ = 0.0;
  double prev_error_ = 0.0;
  bool has_prev_ = false;
};

inline constexpr double kCommandBlend = 0.25;

/// First-order blend that passes 25% of the change in command.
inline double command_filter(double prev_cmd, double new_cmd) { return prev_cmd + kCommandBlend * (new_cmd - prev_cmd); }

/// Waypoint CSV: optional header `x_m,y_m`, then one `x,y` pair per line.
std::vector<Vec2> read_waypoints_csv(const std::string& path);
void write_waypoints_csv(const std::string& path, std::span<const Vec2> waypoints);

}  // namespace shuttle
