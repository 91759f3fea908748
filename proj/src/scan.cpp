#include "shuttle/scan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "shuttle/text.hpp"

namespace shuttle {

namespace {

void require_finite(const PointCloud3D& cloud) {
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw FrameError("frame at t=" + text::num(cloud.timestamp) + ": point " + std::to_string(i) +
                       " has a non-finite coordinate");
    }
  }
}

long cell_coord(double v, double cell_size) { return static_cast<long>(std::floor(v / cell_size)); }

}  // namespace

HeightGrid::HeightGrid(const PointCloud3D& cloud, double cell_size) : cell_size_(cell_size) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("height grid cell size must be positive");
  require_finite(cloud);
  if (cloud.points.empty()) return;

  long max_ix = std::numeric_limits<long>::min();
  long max_iy = std::numeric_limits<long>::min();
  min_ix_ = std::numeric_limits<long>::max();
  min_iy_ = std::numeric_limits<long>::max();
  for (const auto& p : cloud.points) {
    const long ix = cell_coord(p.x, cell_size);
    const long iy = cell_coord(p.y, cell_size);
    min_ix_ = std::min(min_ix_, ix);
    min_iy_ = std::min(min_iy_, iy);
    max_ix = std::max(max_ix, ix);
    max_iy = std::max(max_iy, iy);
  }
  width_ = static_cast<std::size_t>(max_ix - min_ix_ + 1);
  height_ = static_cast<std::size_t>(max_iy - min_iy_ + 1);

  // Dense lookup from grid slot to compact cell index; only touched cells are materialised.
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> slot(width_ * height_, kNone);
  cell_index_.resize(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    const auto gx = static_cast<std::size_t>(cell_coord(p.x, cell_size) - min_ix_);
    const auto gy = static_cast<std::size_t>(cell_coord(p.y, cell_size) - min_iy_);
    auto& s = slot[gy * width_ + gx];
    if (s == kNone) {
      s = cells_.size();
      cells_.push_back({p.z, p.z, {}});
    }
    auto& c = cells_[s];
    c.z_min = std::min(c.z_min, p.z);
    c.z_max = std::max(c.z_max, p.z);
    c.points.push_back(i);
    cell_index_[i] = s;
  }
  slot_ = std::move(slot);
}

const HeightGrid::Cell* HeightGrid::find(long ix, long iy) const {
  if (cells_.empty() || ix < min_ix_ || iy < min_iy_) return nullptr;
  const auto gx = static_cast<std::size_t>(ix - min_ix_);
  const auto gy = static_cast<std::size_t>(iy - min_iy_);
  if (gx >= width_ || gy >= height_) return nullptr;
  const auto s = slot_[gy * width_ + gx];
  return s == std::numeric_limits<std::size_t>::max() ? nullptr : &cells_[s];
}

PointCloud3D remove_ground(const PointCloud3D& cloud, double cell_size, double h_thres) {
  if (!(h_thres > 0.0)) throw std::invalid_argument("h_thres must be positive");
  const HeightGrid grid(cloud, cell_size);
  PointCloud3D out;
  out.timestamp = cloud.timestamp;
  out.points.reserve(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& c = grid.cell_of(i);
    if (c.z_max - c.z_min >= h_thres) out.points.push_back(cloud.points[i]);
  }
  return out;
}

PlanarScan::PlanarScan(double timestamp, double bin_width) : timestamp_(timestamp), bin_width_(bin_width) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
  const double n = 2.0 * std::numbers::pi / bin_width;
  const double rounded = std::round(n);
  if (std::abs(n - rounded) > 1e-6 || rounded < 1.0) {
    throw std::invalid_argument("bin width must divide 2*pi into an integer number of bins");
  }
  bins_.resize(static_cast<std::size_t>(rounded));
}

std::size_t PlanarScan::bin_of(double bearing) const {
  const auto n = static_cast<long>(bins_.size());
  long i = static_cast<long>(std::floor((bearing + std::numbers::pi) / bin_width_ + 0.5));
  i %= n;
  if (i < 0) i += n;
  return static_cast<std::size_t>(i);
}

double PlanarScan::bin_bearing(std::size_t bin) const {
  return -std::numbers::pi + static_cast<double>(bin) * bin_width_;
}

void PlanarScan::offer(double bearing, double range) {
  auto& b = bins_[bin_of(bearing)];
  if (!b || range < b->range) b = Beam{range, bearing};
}

std::size_t PlanarScan::beam_count() const {
  return static_cast<std::size_t>(std::count_if(bins_.begin(), bins_.end(), [](const auto& b) { return b.has_value(); }));
}

std::vector<Vec2> PlanarScan::endpoints() const {
  std::vector<Vec2> out;
  out.reserve(bins_.size());
  for (const auto& b : bins_) {
    if (b) out.push_back({b->range * std::cos(b->bearing), b->range * std::sin(b->bearing)});
  }
  return out;
}

PlanarScan project_to_scan(const PointCloud3D& cloud, double bin_width, double max_range,
                           ProjectionStats* stats) {
  if (!(max_range > 0.0)) throw std::invalid_argument("max range must be positive");
  require_finite(cloud);
  PlanarScan scan(cloud.timestamp, bin_width);
  ProjectionStats local;
  for (const auto& p : cloud.points) {
    const double range = std::hypot(p.x, p.y);
    if (range == 0.0) {
      ++local.skipped_origin;  // bearing undefined
      continue;
    }
    if (range > max_range) {
      ++local.dropped_range;
      continue;
    }
    scan.offer(std::atan2(p.y, p.x), range);
  }
  if (stats) *stats = local;
  return scan;
}

LogParseError::LogParseError(std::size_t line, const std::string& detail, const std::string& source)
    : std::runtime_error((source.empty() ? "" : source + ":") + "line " + std::to_string(line) + ": " + detail),
      line_(line),
      detail_(detail) {}

void write_frame(std::ostream& os, const PointCloud3D& cloud) {
  os << "FRAME " << text::num(cloud.timestamp) << ' ' << cloud.points.size() << '\n';
  for (const auto& p : cloud.points) {
    os << text::num(p.x) << ' ' << text::num(p.y) << ' ' << text::num(p.z) << '\n';
  }
}

std::vector<PointCloud3D> read_frames(std::istream& is) {
  std::vector<PointCloud3D> frames;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto tok = text::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 3 || tok[0] != "FRAME") throw LogParseError(lineno, "expected 'FRAME <timestamp> <n_points>'");
    PointCloud3D frame;
    long n = 0;
    if (!text::parse_double(tok[1], frame.timestamp) || !std::isfinite(frame.timestamp)) {
      throw LogParseError(lineno, "bad timestamp");
    }
    if (!text::parse_long(tok[2], n) || n < 0) throw LogParseError(lineno, "bad point count");
    frame.points.reserve(static_cast<std::size_t>(n));
    for (long k = 0; k < n; ++k) {
      if (!std::getline(is, line)) throw LogParseError(lineno + 1, "unexpected end of file inside frame");
      ++lineno;
      const auto xyz = text::split_ws(line);
      Point3D p;
      if (xyz.size() != 3 || !text::parse_double(xyz[0], p.x) || !text::parse_double(xyz[1], p.y) ||
          !text::parse_double(xyz[2], p.z)) {
        throw LogParseError(lineno, "expected 'x y z'");
      }
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
        throw LogParseError(lineno, "non-finite coordinate");
      }
      frame.points.push_back(p);
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<PointCloud3D> read_frame_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open frame log '" + path + "'");
  try {
    return read_frames(in);
  } catch (const LogParseError& e) {
    throw LogParseError(e.line(), e.detail(), path);
  }
}

void write_frame_file(const std::string& path, const std::vector<PointCloud3D>& frames) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write frame log '" + path + "'");
  for (const auto& f : frames) write_frame(out, f);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace shuttle
