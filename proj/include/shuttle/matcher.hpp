#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shuttle/grid.hpp"
#include "shuttle/pose.hpp"
#include "shuttle/scan.hpp"

namespace shuttle {

enum class Solver {
  kLevenbergMarquardt,  // damped, robust weights, norm stop criterion
  kGaussNewtonFixed,    // undamped, fixed number of steps (Hector-style baseline)
};

struct MatchConfig {
  int max_iterations = 10;
  double epsilon = 1e-3;  // stop when ||delta xi|| < epsilon
  double lambda = 0.01;   // initial damping
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  double lambda_max = 1e7;
  double lambda_min = 1e-2;  // floor for the accept-side decay
  double threshold = 0.5;  // occupancy threshold pi, also the per-point loss cap
  Solver solver = Solver::kLevenbergMarquardt;
  /// Robust capped weights; unset means on for LM and off for the GN baseline.
  std::optional<bool> robust_weights;

  bool uses_robust_weights() const { return robust_weights.value_or(solver == Solver::kLevenbergMarquardt); }
  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

enum class MatchStatus { kConverged, kIterationCap, kNoOverlap, kSingular };
std::string to_string(MatchStatus s);

struct IterationTrace {
  int iteration = 0;
  double error = 0.0;      // objective after this iteration
  double step_norm = 0.0;  // ||delta xi||
  double lambda = 0.0;     // damping used for this step
  bool accepted = false;
};

struct MatchResult {
  PoseSE2 pose;
  int iterations = 0;
  int total_iterations = 0;            // summed over levels for pyramid matching
  double final_alignment_error = 0.0;  // sum (1 - M)^2 over in-bounds points at `pose`
  double final_objective = 0.0;        // the objective the solver minimised
  bool converged = false;  // LM: final step norm below epsilon. GN_fixed: all fixed steps completed.
  MatchStatus status = MatchStatus::kIterationCap;
  std::size_t points_used = 0;
  std::vector<IterationTrace> trace;
};

/// Weight realising a per-point loss cap of pi^2: 1 for |r| <= pi, pi^2 / r^2 beyond.
double robust_weight(double residual, double threshold);
/// min(r^2, pi^2).
double capped_loss(double residual, double threshold);

/// d S / d xi for end point s at heading theta (2x3, row-major).
std::array<double, 6> endpoint_jacobian(double theta, Vec2 s);

struct PointTerm {
  bool in_bounds = false;
  double residual = 0.0;              // 1 - M(S(xi))
  std::array<double, 3> jacobian{};   // grad M * dS/dxi
  double weight = 0.0;
};

struct Linearization {
  std::vector<PointTerm> terms;
  std::size_t in_bounds = 0;
};

Linearization residual_and_jacobian(const OccupancyGrid& grid, const PoseSE2& pose,
                                    std::span<const Vec2> endpoints, double threshold, bool robust = true);

/// Sum of (1 - M)^2 over in-bounds points, with the per-point cap when `robust`.
double alignment_error(const OccupancyGrid& grid, const PoseSE2& pose, std::span<const Vec2> endpoints,
                       double threshold, bool robust);

MatchResult match(const OccupancyGrid& grid, std::span<const Vec2> endpoints, const PoseSE2& initial,
                  const MatchConfig& cfg);
MatchResult match(const OccupancyGrid& grid, const PlanarScan& scan, const PoseSE2& initial, const MatchConfig& cfg);

/// Coarse-to-fine: each level starts from the previous level's estimate. A failing level
/// hands its incoming estimate on unchanged.
MatchResult match_pyramid(const OccupancyPyramid& pyramid, std::span<const Vec2> endpoints,
                          const PoseSE2& initial, const MatchConfig& cfg);
MatchResult match_pyramid(const OccupancyPyramid& pyramid, const PlanarScan& scan, const PoseSE2& initial,
                          const MatchConfig& cfg);

/// CSV rows "iter,error,step_norm,lambda".
std::string trace_csv(const MatchResult& r);

}  // namespace shuttle
