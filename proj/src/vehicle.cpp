#include "shuttle/vehicle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "shuttle/scan.hpp"
#include "shuttle/text.hpp"

namespace shuttle {

void VehicleParams::validate() const {
  for (double v : {m, J, l_f, l_r, C_f, C_r, l_s, V}) {
    if (!(std::isfinite(v) && v > 0.0)) throw std::invalid_argument("vehicle parameters must be positive and finite");
  }
}

LateralModel lateral_model(const VehicleParams& p) {
  if (!(p.V > 0.0)) throw std::invalid_argument("lateral model is singular for V <= 0");
  const double V = p.V;
  LateralModel mdl;
  mdl.A.setZero();
  mdl.B.setZero();
  mdl.A(0, 0) = -(p.C_r + p.C_f) / (p.m * V);
  mdl.A(0, 1) = -1.0 + (p.C_r * p.l_r - p.C_f * p.l_f) / (p.m * V * V);
  mdl.A(1, 0) = (p.C_r * p.l_r - p.C_f * p.l_f) / p.J;
  mdl.A(1, 1) = -(p.C_r * p.l_r * p.l_r + p.C_f * p.l_f * p.l_f) / (p.J * V);
  mdl.A(2, 1) = 1.0;
  mdl.A(3, 0) = V;
  mdl.A(3, 1) = p.l_s;
  mdl.A(3, 2) = V;
  mdl.B(0, 0) = p.C_f / (p.m * V);
  mdl.B(1, 0) = p.C_f * p.l_f / p.J;
  mdl.B(2, 1) = -V;
  mdl.B(3, 1) = p.l_s * V;
  return mdl;
}

LateralState lateral_dynamics(const LateralState& x, double delta_f, double rho_ref, const VehicleParams& p) {
  const LateralModel mdl = lateral_model(p);
  return mdl.A * x + mdl.B * Eigen::Vector2d(delta_f, rho_ref);
}

SteadyState steady_state(const VehicleParams& p, double delta_f) {
  const LateralModel mdl = lateral_model(p);
  const Eigen::Matrix2d A = mdl.A.topLeftCorner<2, 2>();
  const Eigen::Vector2d b = mdl.B.block<2, 1>(0, 0) * delta_f;
  const Eigen::Vector2d x = A.fullPivLu().solve(-b);
  return {x(0), x(1)};
}

double turn_radius(const VehicleParams& p, double delta_f) {
  const SteadyState ss = steady_state(p, delta_f);
  return p.V / std::abs(ss.r);
}

Vec2 CubicSegment::position(double l) const {
  return {((ax * l + bx) * l + cx) * l + dx, ((ay * l + by) * l + cy) * l + dy};
}

Vec2 CubicSegment::derivative(double l) const {
  return {(3.0 * ax * l + 2.0 * bx) * l + cx, (3.0 * ay * l + 2.0 * by) * l + cy};
}

Vec2 CubicSegment::second_derivative(double l) const { return {6.0 * ax * l + 2.0 * bx, 6.0 * ay * l + 2.0 * by}; }

PathSpline::PathSpline(std::vector<CubicSegment> segments, double residual_rms, double max_residual)
    : segments_(std::move(segments)), residual_rms_(residual_rms), max_residual_(max_residual) {}

double PathSpline::segment_length(std::size_t i, double l) const {
  static constexpr std::array<double, 5> kNodes = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                                   0.9061798459386640};
  static constexpr std::array<double, 5> kWeights = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                     0.4786286704993665, 0.2369268850561891};
  const CubicSegment& s = segments_.at(i);
  double sum = 0.0;
  for (std::size_t k = 0; k < kNodes.size(); ++k) {
    const Vec2 d = s.derivative(0.5 * l * (kNodes[k] + 1.0));
    sum += kWeights[k] * std::hypot(d.x, d.y);
  }
  return 0.5 * l * sum;
}

double PathSpline::length() const {
  double total = 0.0;
  for (std::size_t i = 0; i < segments_.size(); ++i) total += segment_length(i);
  return total;
}

PoseSE2 PathSpline::at_distance(double s) const {
  if (segments_.empty()) throw std::logic_error("empty path");
  std::size_t i = 0;
  double remaining = std::max(s, 0.0);
  for (; i + 1 < segments_.size(); ++i) {
    const double len = segment_length(i);
    if (remaining <= len) break;
    remaining -= len;
  }
  const double total = segment_length(i);
  double l = std::clamp(remaining / total, 0.0, 1.0);
  for (int it = 0; it < 30 && remaining < total; ++it) {
    const Vec2 d = segments_[i].derivative(l);
    const double speed = std::hypot(d.x, d.y);
    if (!(speed > 0.0)) break;
    const double next = std::clamp(l - (segment_length(i, l) - remaining) / speed, 0.0, 1.0);
    const double delta = std::abs(next - l);
    l = next;
    if (delta < 1e-13) break;
  }
  if (remaining >= total) l = 1.0;
  const Vec2 p = segments_[i].position(l);
  const Vec2 d = segments_[i].derivative(l);
  return {p.x, p.y, std::atan2(d.y, d.x)};
}

PathSpline fit_path(std::span<const Vec2> waypoints, int seg_len) {
  if (seg_len < 4) throw std::invalid_argument("segment length must be at least 4 points");
  const std::size_t n = waypoints.size();
  const std::size_t step = static_cast<std::size_t>(seg_len - 1);
  if (n < 2 * step + 1) {
    throw std::invalid_argument("need at least " + std::to_string(2 * step + 1) + " waypoints for two segments");
  }
  for (const Vec2& w : waypoints) {
    if (!std::isfinite(w.x) || !std::isfinite(w.y)) throw std::invalid_argument("waypoints must be finite");
  }

  const std::size_t S = (n - 1) / step;
  std::vector<std::size_t> bounds(S + 1);
  for (std::size_t i = 0; i <= S; ++i) bounds[i] = i * step;
  bounds[S] = n - 1;

  for (std::size_t i = 0; i < S; ++i) {
    const Vec2 first = waypoints[bounds[i]];
    bool degenerate = true;
    for (std::size_t k = bounds[i] + 1; k <= bounds[i + 1] && degenerate; ++k) {
      degenerate = waypoints[k].x == first.x && waypoints[k].y == first.y;
    }
    if (degenerate) throw std::invalid_argument("segment " + std::to_string(i) + " has coincident points");
  }

  // Unknowns: joint positions P_j then joint derivatives D_j; cubic Hermite basis per segment.
  const Eigen::Index unknowns = static_cast<Eigen::Index>(2 * (S + 1));
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), unknowns);
  Eigen::MatrixXd rhs(static_cast<Eigen::Index>(n), 2);
  const Eigen::Index dOff = static_cast<Eigen::Index>(S + 1);
  for (std::size_t i = 0; i < S; ++i) {
    const double span = static_cast<double>(bounds[i + 1] - bounds[i]);
    const std::size_t last = (i + 1 == S) ? bounds[i + 1] : bounds[i + 1] - 1;
    for (std::size_t k = bounds[i]; k <= last; ++k) {
      const double l = static_cast<double>(k - bounds[i]) / span;
      const double l2 = l * l, l3 = l2 * l;
      const auto row = static_cast<Eigen::Index>(k);
      const auto j = static_cast<Eigen::Index>(i);
      M(row, j) = 2.0 * l3 - 3.0 * l2 + 1.0;
      M(row, j + 1) = -2.0 * l3 + 3.0 * l2;
      M(row, dOff + j) = l3 - 2.0 * l2 + l;
      M(row, dOff + j + 1) = l3 - l2;
      rhs(row, 0) = waypoints[k].x;
      rhs(row, 1) = waypoints[k].y;
    }
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  if (qr.rank() < unknowns) throw std::invalid_argument("path fit is rank deficient");
  const Eigen::MatrixXd sol = qr.solve(rhs);

  std::vector<CubicSegment> segs(S);
  for (std::size_t i = 0; i < S; ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    auto coeffs = [&](int c, double& a, double& b, double& cc, double& d) {
      const double p0 = sol(j, c), p1 = sol(j + 1, c), d0 = sol(dOff + j, c), d1 = sol(dOff + j + 1, c);
      a = 2.0 * p0 + d0 - 2.0 * p1 + d1;
      b = -3.0 * p0 - 2.0 * d0 + 3.0 * p1 - d1;
      cc = d0;
      d = p0;
    };
    coeffs(0, segs[i].ax, segs[i].bx, segs[i].cx, segs[i].dx);
    coeffs(1, segs[i].ay, segs[i].by, segs[i].cy, segs[i].dy);
  }

  double sq = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < S; ++i) {
    const double span = static_cast<double>(bounds[i + 1] - bounds[i]);
    const std::size_t last = (i + 1 == S) ? bounds[i + 1] : bounds[i + 1] - 1;
    for (std::size_t k = bounds[i]; k <= last; ++k) {
      const Vec2 p = segs[i].position(static_cast<double>(k - bounds[i]) / span);
      const double e = std::hypot(p.x - waypoints[k].x, p.y - waypoints[k].y);
      sq += e * e;
      worst = std::max(worst, e);
    }
  }
  return PathSpline(std::move(segs), std::sqrt(sq / static_cast<double>(n)), worst);
}

namespace {

struct Nearest {
  double lambda = 0.0;
  double dist2 = std::numeric_limits<double>::infinity();
};

Nearest nearest_on_segment(const CubicSegment& s, Vec2 q) {
  constexpr int kSamples = 20;
  Nearest best;
  for (int k = 0; k <= kSamples; ++k) {
    const double l = static_cast<double>(k) / kSamples;
    const Vec2 p = s.position(l);
    const double d2 = (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y);
    if (d2 < best.dist2) best = {l, d2};
  }
  double l = best.lambda;
  for (int it = 0; it < 20; ++it) {
    const Vec2 p = s.position(l), d = s.derivative(l), dd = s.second_derivative(l);
    const double ex = p.x - q.x, ey = p.y - q.y;
    const double g = ex * d.x + ey * d.y;
    const double h = d.x * d.x + d.y * d.y + ex * dd.x + ey * dd.y;
    if (!(h > 0.0)) break;
    const double next = std::clamp(l - g / h, 0.0, 1.0);
    const double delta = std::abs(next - l);
    l = next;
    if (delta < 1e-12) break;
  }
  const Vec2 p = s.position(l);
  const double d2 = (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y);
  if (d2 < best.dist2) best = {l, d2};
  return best;
}

}  // namespace

std::optional<PathError> path_error(const PathSpline& path, const PoseSE2& pose, double l_s,
                                    std::optional<std::size_t> hint, double neighborhood) {
  if (path.size() == 0) return std::nullopt;
  std::size_t lo = 0, hi = path.size() - 1;
  if (hint) {
    const std::size_t h = std::min(*hint, path.size() - 1);
    lo = h >= 2 ? h - 2 : 0;
    hi = std::min(h + 3, path.size() - 1);
  }
  const Vec2 q{pose.x, pose.y};
  std::size_t best_seg = lo;
  Nearest best;
  for (std::size_t i = lo; i <= hi; ++i) {
    const Nearest n = nearest_on_segment(path[i], q);
    if (n.dist2 < best.dist2) {
      best = n;
      best_seg = i;
    }
  }
  const double dist = std::sqrt(best.dist2);
  if (!(dist <= neighborhood)) return std::nullopt;

  const CubicSegment& s = path[best_seg];
  const Vec2 p = s.position(best.lambda);
  const Vec2 t = s.derivative(best.lambda);
  const double tn = std::hypot(t.x, t.y);
  PathError e;
  e.segment = best_seg;
  e.lambda = best.lambda;
  e.nearest = p;
  e.distance = dist;
  e.h = (t.x * (q.y - p.y) - t.y * (q.x - p.x)) / tn;
  e.dpsi = wrap_angle(pose.theta - std::atan2(t.y, t.x));
  e.y = e.h + l_s * std::sin(e.dpsi);
  e.past_end = best_seg + 1 == path.size() && best.lambda >= 1.0 && (q.x - p.x) * t.x + (q.y - p.y) * t.y > 0.0;
  return e;
}

void PidConfig::validate() const {
  for (double v : {kp, ki, kd, integral_limit}) {
    if (!(std::isfinite(v) && v >= 0.0)) throw std::invalid_argument("PID gains and integral limit must be non-negative");
  }
  if (!(std::isfinite(delta_max) && delta_max > 0.0)) throw std::invalid_argument("steering limit must be positive");
}

PidController::PidController(PidConfig cfg) : cfg_(cfg) { cfg_.validate(); }

double PidController::step(double y, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("PID time step must be positive");
  const double e = -y;
  integral_ = std::clamp(integral_ + cfg_.ki * e * dt, -cfg_.integral_limit, cfg_.integral_limit);
  const double deriv = has_prev_ ? (e - prev_error_) / dt : 0.0;
  prev_error_ = e;
  has_prev_ = true;
  const double u = cfg_.kp * e + integral_ + cfg_.kd * deriv;
  return std::clamp(u, -cfg_.delta_max, cfg_.delta_max);
}

void PidController::reset() {
  integral_ = 0.0;
  prev_error_ = 0.0;
  has_prev_ = false;
}

std::vector<Vec2> read_waypoints_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open waypoint file '" + path + "'");
  std::vector<Vec2> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = text::split(t, ',');
    Vec2 p;
    if (fields.size() != 2 || !text::parse_double(text::trim(fields[0]), p.x) ||
        !text::parse_double(text::trim(fields[1]), p.y)) {
      if (pts.empty() && lineno == 1 && fields.size() == 2) continue;  // header
      throw LogParseError(lineno, "expected 'x,y'", path);
    }
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw LogParseError(lineno, "non-finite waypoint", path);
    pts.push_back(p);
  }
  return pts;
}

void write_waypoints_csv(const std::string& path, std::span<const Vec2> waypoints) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write waypoint file '" + path + "'");
  out << "x_m,y_m\n";
  for (const Vec2& w : waypoints) out << text::num(w.x) << ',' << text::num(w.y) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace shuttle
