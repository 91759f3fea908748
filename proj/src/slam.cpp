#include "shuttle/slam.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "shuttle/text.hpp"

namespace shuttle {

void SlamConfig::validate() const {
  if (!(scan.cell_size > 0.0) || !(scan.h_thres > 0.0) || !(scan.max_range > 0.0)) {
    throw std::invalid_argument("scan config: cell_size, h_thres and max_range must be positive");
  }
  if (grid.levels < 1) throw std::invalid_argument("grid config: at least one level");
  if (!(grid.resolution > 0.0)) throw std::invalid_argument("grid config: resolution must be positive");
  if (grid.size < 2.0 * scan.max_range) {
    throw std::invalid_argument("grid config: map size " + text::num(grid.size) + " m is smaller than twice the max range " +
                                text::num(scan.max_range) + " m");
  }
  if (!(grid.occupied_threshold > 0.0 && grid.occupied_threshold < 1.0)) {
    throw std::invalid_argument("grid config: occupied threshold must lie in (0, 1)");
  }
  match.validate();
  if (!origin.finite()) throw std::invalid_argument("origin pose must be finite");
  if (map_center && !(std::isfinite(map_center->x) && std::isfinite(map_center->y))) {
    throw std::invalid_argument("map centre must be finite");
  }
  if (!(max_translation > 0.0) || !(max_rotation > 0.0)) throw std::invalid_argument("motion bounds must be positive");
}

namespace {
const SlamConfig& validated(const SlamConfig& c) {
  c.validate();
  return c;
}
}  // namespace

SlamSession::SlamSession(SlamConfig cfg)
    : cfg_(validated(cfg)), pyramid_(cfg_.grid, cfg_.map_center.value_or(Vec2{cfg_.origin.x, cfg_.origin.y})), pose_(cfg_.origin) {
  pose_.theta = wrap_angle(pose_.theta);
}

FrameReport SlamSession::process_frame(const PointCloud3D& cloud) {
  if (!trajectory_.empty() && !(cloud.timestamp > trajectory_.back().timestamp)) {
    throw FrameError("frame timestamp " + text::num(cloud.timestamp) + " does not follow " +
                     text::num(trajectory_.back().timestamp));
  }
  const PointCloud3D kept = remove_ground(cloud, cfg_.scan.cell_size, cfg_.scan.h_thres);
  const PlanarScan scan = project_to_scan(kept, cfg_.scan.bin_width, cfg_.scan.max_range);
  const auto endpoints = scan.endpoints();

  FrameReport rep;
  rep.timestamp = cloud.timestamp;
  rep.raw_points = cloud.points.size();
  rep.kept_points = kept.points.size();
  rep.projected_points = endpoints.size();

  if (trajectory_.empty()) {
    // Bootstrap: seed the map at the configured origin.
    pyramid_.update(pose_, scan);
    rep.converged = true;
    rep.map_updated = true;
  } else {
    const MatchResult m = match_pyramid(pyramid_, endpoints, pose_, cfg_.match);
    rep.status = m.status;
    rep.iterations = m.iterations;
    rep.total_iterations = m.total_iterations;
    rep.alignment_error = m.final_alignment_error;
    const bool failed = m.status == MatchStatus::kNoOverlap || m.status == MatchStatus::kSingular;
    const double dt = std::hypot(m.pose.x - pose_.x, m.pose.y - pose_.y);
    const double dr = std::abs(wrap_angle(m.pose.theta - pose_.theta));
    rep.motion_rejected = !failed && (dt > cfg_.max_translation || dr > cfg_.max_rotation);
    if (!failed && !rep.motion_rejected) pose_ = m.pose;
    rep.converged = m.converged && !rep.motion_rejected;
    if (rep.converged) {
      pyramid_.update(pose_, scan);
      rep.map_updated = true;
    }
  }
  rep.pose = pose_;
  trajectory_.push_back({rep.timestamp, pose_, rep.converged, rep.alignment_error, rep.iterations});
  reports_.push_back(rep);
  return rep;
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryEntry>& trajectory) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory '" + path + "'");
  out << "timestamp_s,x_m,y_m,theta_rad,converged,align_error,iterations\n";
  for (const auto& e : trajectory) {
    out << text::num(e.timestamp) << ',' << text::num(e.pose.x) << ',' << text::num(e.pose.y) << ','
        << text::num(e.pose.theta) << ',' << (e.converged ? 1 : 0) << ',' << text::num(e.align_error) << ','
        << e.iterations << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<TrajectoryEntry> read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory '" + path + "'");
  std::vector<TrajectoryEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty() || (lineno == 1 && line.rfind("timestamp", 0) == 0)) continue;
    const auto f = text::split(line, ',');
    TrajectoryEntry e;
    long conv = 0;
    long iters = 0;
    if (f.size() != 7 || !text::parse_double(f[0], e.timestamp) || !text::parse_double(f[1], e.pose.x) ||
        !text::parse_double(f[2], e.pose.y) || !text::parse_double(f[3], e.pose.theta) ||
        !text::parse_long(f[4], conv) || !text::parse_double(f[5], e.align_error) || !text::parse_long(f[6], iters)) {
      throw LogParseError(lineno, "malformed trajectory row", path);
    }
    e.converged = conv != 0;
    e.iterations = static_cast<int>(iters);
    out.push_back(e);
  }
  return out;
}

void write_frame_reports_csv(const std::string& path, const std::vector<FrameReport>& reports) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write frame report '" + path + "'");
  out << "timestamp_s,x_m,y_m,theta_rad,status,converged,align_error,iterations,total_iterations,"
         "raw_points,kept_points,projected_points,map_updated\n";
  for (const auto& r : reports) {
    out << text::num(r.timestamp) << ',' << text::num(r.pose.x) << ',' << text::num(r.pose.y) << ','
        << text::num(r.pose.theta) << ',' << (r.motion_rejected ? "motion_rejected" : to_string(r.status)) << ','
        << (r.converged ? 1 : 0) << ',' << text::num(r.alignment_error) << ',' << r.iterations << ','
        << r.total_iterations << ',' << r.raw_points << ',' << r.kept_points << ',' << r.projected_points << ','
        << (r.map_updated ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void export_session(const SlamSession& session, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
  const std::filesystem::path base(dir);
  write_trajectory_csv((base / "trajectory.csv").string(), session.trajectory());
  write_frame_reports_csv((base / "frames.csv").string(), session.reports());
  for (std::size_t k = 0; k < session.pyramid().level_count(); ++k) {
    export_pgm(session.pyramid().level(k), (base / ("map_level" + std::to_string(k) + ".pgm")).string(),
               session.config().grid.occupied_threshold);
  }
}

}  // namespace shuttle
