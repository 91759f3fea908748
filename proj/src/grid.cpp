#include "shuttle/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "shuttle/text.hpp"

namespace shuttle {

namespace {

double sigmoid(double l) { return 1.0 / (1.0 + std::exp(-l)); }

// Liang-Barsky clip of a + t (b - a), t in [0, 1], to the box [0, w] x [0, h].
bool clip_segment(Vec2 a, Vec2 b, double w, double h, double& t0, double& t1) {
  t0 = 0.0;
  t1 = 1.0;
  const double d[2] = {b.x - a.x, b.y - a.y};
  const double lo[2] = {-a.x, -a.y};     // p * t >= lo form: d*t >= -a
  const double hi[2] = {w - a.x, h - a.y};
  for (int k = 0; k < 2; ++k) {
    if (d[k] == 0.0) {
      if (lo[k] > 0.0 || hi[k] < 0.0) return false;
      continue;
    }
    double ta = lo[k] / d[k];
    double tb = hi[k] / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

OccupancyGrid::OccupancyGrid(double resolution, Vec2 origin, std::size_t width, std::size_t height,
                             LogOddsModel model)
    : resolution_(resolution), origin_(origin), width_(width), height_(height), model_(model) {
  if (!(resolution > 0.0)) throw std::invalid_argument("grid resolution must be positive");
  if (width == 0 || height == 0) throw std::invalid_argument("grid must have at least one cell");
  if (!(model.l_min <= 0.0 && model.l_max >= 0.0)) throw std::invalid_argument("log-odds clamp must contain 0");
  log_odds_.assign(width * height, 0.0);
  mark_.assign(width * height, 0);
}

CellIndex OccupancyGrid::cell_of(Vec2 p) const {
  return {static_cast<long>(std::floor((p.x - origin_.x) / resolution_)),
          static_cast<long>(std::floor((p.y - origin_.y) / resolution_))};
}

Vec2 OccupancyGrid::cell_center(CellIndex c) const {
  return {origin_.x + (static_cast<double>(c.x) + 0.5) * resolution_,
          origin_.y + (static_cast<double>(c.y) + 0.5) * resolution_};
}

void OccupancyGrid::set_log_odds(CellIndex c, double l) {
  log_odds_[flat(c)] = std::clamp(l, model_.l_min, model_.l_max);
}

double OccupancyGrid::probability(CellIndex c) const { return sigmoid(log_odds_[flat(c)]); }

void OccupancyGrid::set_probability(CellIndex c, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0, 1]");
  set_log_odds(c, std::log(p) - std::log1p(-p));
}

std::optional<InterpResult> OccupancyGrid::interpolate(Vec2 p) const {
  const double u = (p.x - origin_.x) / resolution_ - 0.5;
  const double v = (p.y - origin_.y) / resolution_ - 0.5;
  if (!std::isfinite(u) || !std::isfinite(v)) return std::nullopt;
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  if (fu < 0.0 || fv < 0.0 || fu + 1.0 >= static_cast<double>(width_) || fv + 1.0 >= static_cast<double>(height_)) {
    return std::nullopt;
  }
  const long i = static_cast<long>(fu);
  const long j = static_cast<long>(fv);
  const double tx = u - fu;
  const double ty = v - fv;
  const double m00 = probability({i, j});
  const double m10 = probability({i + 1, j});
  const double m01 = probability({i, j + 1});
  const double m11 = probability({i + 1, j + 1});

  InterpResult r;
  r.value = ty * (tx * m11 + (1.0 - tx) * m01) + (1.0 - ty) * (tx * m10 + (1.0 - tx) * m00);
  r.gradient.x = (ty * (m11 - m01) + (1.0 - ty) * (m10 - m00)) / resolution_;
  r.gradient.y = (tx * (m11 - m10) + (1.0 - tx) * (m01 - m00)) / resolution_;
  return r;
}

void OccupancyGrid::trace(Vec2 from, Vec2 to, bool end_is_hit, std::vector<std::size_t>& touched) {
  const double w = static_cast<double>(width_);
  const double h = static_cast<double>(height_);
  const Vec2 a{(from.x - origin_.x) / resolution_, (from.y - origin_.y) / resolution_};
  const Vec2 b{(to.x - origin_.x) / resolution_, (to.y - origin_.y) / resolution_};
  double t0 = 0.0;
  double t1 = 1.0;
  if (!clip_segment(a, b, w, h, t0, t1)) return;
  const Vec2 A{a.x + t0 * (b.x - a.x), a.y + t0 * (b.y - a.y)};
  const Vec2 B{a.x + t1 * (b.x - a.x), a.y + t1 * (b.y - a.y)};

  auto cell = [&](double c, std::size_t n) {
    return std::clamp(static_cast<long>(std::floor(c)), 0L, static_cast<long>(n) - 1);
  };
  long ix = cell(A.x, width_);
  long iy = cell(A.y, height_);
  const long ex = cell(B.x, width_);
  const long ey = cell(B.y, height_);

  const double dx = B.x - A.x;
  const double dy = B.y - A.y;
  const long sx = dx > 0.0 ? 1 : -1;
  const long sy = dy > 0.0 ? 1 : -1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double tdx = dx != 0.0 ? 1.0 / std::abs(dx) : kInf;
  const double tdy = dy != 0.0 ? 1.0 / std::abs(dy) : kInf;
  double tmx = dx > 0.0 ? (static_cast<double>(ix) + 1.0 - A.x) * tdx : dx < 0.0 ? (A.x - static_cast<double>(ix)) * tdx : kInf;
  double tmy = dy > 0.0 ? (static_cast<double>(iy) + 1.0 - A.y) * tdy : dy < 0.0 ? (A.y - static_cast<double>(iy)) * tdy : kInf;

  auto miss = [&](long x, long y) {
    const std::size_t k = flat({x, y});
    if (mark_[k] == 0) {
      mark_[k] = 1;
      touched.push_back(k);
    }
  };

  const long limit = std::abs(ex - ix) + std::abs(ey - iy) + 2;
  for (long step = 0; step < limit; ++step) {
    if (ix == ex && iy == ey) break;
    miss(ix, iy);
    if (tmx < tmy) {
      ix += sx;
      tmx += tdx;
    } else {
      iy += sy;
      tmy += tdy;
    }
    if (!contains({ix, iy})) return;
  }
  if (!end_is_hit && ix == ex && iy == ey) miss(ex, ey);
}

void OccupancyGrid::update_with_endpoints(Vec2 sensor, std::span<const Vec2> world_endpoints) {
  std::vector<std::size_t> touched;
  std::vector<bool> inside(world_endpoints.size());
  for (std::size_t i = 0; i < world_endpoints.size(); ++i) {
    const CellIndex c = cell_of(world_endpoints[i]);
    inside[i] = contains(c);
    if (!inside[i]) continue;
    const std::size_t k = flat(c);
    if (mark_[k] != 2) {
      if (mark_[k] == 0) touched.push_back(k);
      mark_[k] = 2;
    }
  }
  for (std::size_t i = 0; i < world_endpoints.size(); ++i) trace(sensor, world_endpoints[i], inside[i], touched);

  for (const std::size_t k : touched) {
    const double delta = mark_[k] == 2 ? model_.l_hit : model_.l_miss;
    log_odds_[k] = std::clamp(log_odds_[k] + delta, model_.l_min, model_.l_max);
    mark_[k] = 0;
  }
}

void OccupancyGrid::update_with_scan(const PoseSE2& pose, const PlanarScan& scan) {
  if (!pose.finite()) throw std::invalid_argument("map update with non-finite pose");
  const auto local = scan.endpoints();
  std::vector<Vec2> world;
  world.reserve(local.size());
  for (const auto& s : local) world.push_back(transform_endpoint(pose, s));
  update_with_endpoints({pose.x, pose.y}, world);
}

std::vector<CellIndex> OccupancyGrid::occupied_cells(double threshold) const {
  std::vector<CellIndex> out;
  for (std::size_t y = 0; y < height_; ++y) {
    for (std::size_t x = 0; x < width_; ++x) {
      const CellIndex c{static_cast<long>(x), static_cast<long>(y)};
      if (probability(c) > threshold) out.push_back(c);
    }
  }
  return out;
}

std::uint64_t OccupancyGrid::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const double v : log_odds_) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    for (int k = 0; k < 8; ++k) {
      h ^= (bits >> (8 * k)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

OccupancyPyramid::OccupancyPyramid(const GridConfig& cfg, Vec2 center) {
  if (cfg.levels < 1) throw std::invalid_argument("pyramid needs at least one level");
  if (!(cfg.resolution > 0.0) || !(cfg.size > 0.0)) throw std::invalid_argument("bad grid geometry");
  // `center` sits on a finest-level cell centre: cells0 is even and the origin is shifted by
  // half a cell, which also keeps every coarser level's cell boundaries off whole multiples
  // of the finest resolution.
  auto cells0 = static_cast<std::size_t>(std::ceil(cfg.size / cfg.resolution - 1e-9));
  const std::size_t top = std::size_t{1} << (cfg.levels - 1);
  cells0 = (cells0 + 2 * top - 1) / (2 * top) * (2 * top);
  const double half = static_cast<double>(cells0 / 2) * cfg.resolution + cfg.resolution / 2.0;
  const Vec2 origin{center.x - half, center.y - half};
  levels_.reserve(static_cast<std::size_t>(cfg.levels));
  for (int k = 0; k < cfg.levels; ++k) {
    const std::size_t scale = std::size_t{1} << k;
    const std::size_t cells = (cells0 + scale - 1) / scale;
    levels_.emplace_back(cfg.resolution * static_cast<double>(scale), origin, cells, cells, cfg.model);
  }
}

void OccupancyPyramid::update(const PoseSE2& pose, const PlanarScan& scan) {
  for (auto& level : levels_) level.update_with_scan(pose, scan);
}

void export_pgm(const OccupancyGrid& grid, const std::string& pgm_path, double threshold) {
  std::ofstream out(pgm_path);
  if (!out) throw std::runtime_error("cannot write map '" + pgm_path + "'");
  out << "P2\n" << grid.width() << ' ' << grid.height() << "\n255\n";
  for (std::size_t row = 0; row < grid.height(); ++row) {
    const long y = static_cast<long>(grid.height() - 1 - row);
    for (std::size_t x = 0; x < grid.width(); ++x) {
      const double m = grid.probability({static_cast<long>(x), y});
      out << static_cast<int>(std::lround(255.0 * (1.0 - m))) << (x + 1 == grid.width() ? '\n' : ' ');
    }
  }
  if (!out) throw std::runtime_error("write failed for '" + pgm_path + "'");

  std::string meta_path = pgm_path;
  const auto dot = meta_path.rfind(".pgm");
  if (dot != std::string::npos && dot + 4 == meta_path.size()) meta_path.resize(dot);
  meta_path += ".txt";
  std::ofstream meta(meta_path);
  if (!meta) throw std::runtime_error("cannot write map metadata '" + meta_path + "'");
  meta << "resolution = " << text::num(grid.resolution()) << '\n'
       << "origin_x = " << text::num(grid.origin().x) << '\n'
       << "origin_y = " << text::num(grid.origin().y) << '\n'
       << "width = " << grid.width() << '\n'
       << "height = " << grid.height() << '\n'
       << "occupied_threshold = " << text::num(threshold) << '\n'
       << "first_row = max_y\n";
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string magic;
  GrayImage img;
  in >> magic >> img.width >> img.height >> img.max_value;
  if (!in || magic != "P2") throw std::runtime_error(path + ": not a plain PGM (P2) file");
  img.pixels.resize(img.width * img.height);
  for (auto& p : img.pixels) {
    if (!(in >> p)) throw std::runtime_error(path + ": truncated pixel data");
  }
  return img;
}

}  // namespace shuttle
