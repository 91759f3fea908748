#include "shuttle/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <limits>
#include <utility>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "shuttle/scan.hpp"
#include "shuttle/text.hpp"

namespace shuttle {

namespace {

struct Value {
  double real = 0.0;
  std::uint64_t integer = 0;
  bool flag = false;
  std::string word;
};

struct KeyImpl {
  ConfigKey key;
  std::function<void(SimRun&, const Value&)> set;
  std::function<std::string(SimRun&)> get;  // empty string: unset
  std::uint64_t count_max = std::numeric_limits<std::uint64_t>::max();
};

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class Access>
KeyImpl real_key(std::string name, ValueKind kind, std::string help, Access access) {
  return {{std::move(name), kind, std::move(help), {}},
          [access](SimRun& s, const Value& v) { access(s) = v.real; },
          [access](SimRun& s) { return exact(access(s)); }};
}

template <class Access>
KeyImpl count_key(std::string name, std::string help, Access access) {
  return {{std::move(name), ValueKind::kCount, std::move(help), {}},
          [access](SimRun& s, const Value& v) {
            using T = std::remove_reference_t<decltype(access(s))>;
            access(s) = static_cast<T>(v.integer);
          },
          [access](SimRun& s) { return std::to_string(access(s)); },
          static_cast<std::uint64_t>(std::numeric_limits<std::remove_reference_t<decltype(access(std::declval<SimRun&>()))>>::max())};
}

const std::vector<KeyImpl>& table() {
  using K = ValueKind;
  static const std::vector<KeyImpl> keys = [] {
    std::vector<KeyImpl> k;
    k.push_back(real_key("scan.cell_size", K::kLength, "ground-removal height grid cell", [](SimRun& s) -> double& { return s.slam.scan.cell_size; }));
    k.push_back(real_key("scan.h_thres", K::kLength, "minimum height spread of an obstacle cell", [](SimRun& s) -> double& { return s.slam.scan.h_thres; }));
    k.push_back(real_key("scan.bin_width", K::kAngle, "planar scan angular bin width", [](SimRun& s) -> double& { return s.slam.scan.bin_width; }));
    k.push_back(real_key("scan.max_range", K::kLength, "projection range limit", [](SimRun& s) -> double& { return s.slam.scan.max_range; }));

    k.push_back(real_key("grid.resolution", K::kLength, "finest pyramid cell size", [](SimRun& s) -> double& { return s.slam.grid.resolution; }));
    k.push_back(count_key("grid.levels", "pyramid depth", [](SimRun& s) -> int& { return s.slam.grid.levels; }));
    k.push_back(real_key("grid.size", K::kLength, "square map extent", [](SimRun& s) -> double& { return s.slam.grid.size; }));
    k.push_back(real_key("grid.occupied_threshold", K::kNumber, "occupancy probability threshold", [](SimRun& s) -> double& { return s.slam.grid.occupied_threshold; }));
    k.push_back(real_key("grid.l_hit", K::kNumber, "log-odds increment of an end-point cell", [](SimRun& s) -> double& { return s.slam.grid.model.l_hit; }));
    k.push_back(real_key("grid.l_miss", K::kNumber, "log-odds increment of a traversed cell", [](SimRun& s) -> double& { return s.slam.grid.model.l_miss; }));
    k.push_back(real_key("grid.l_min", K::kNumber, "log-odds lower clamp", [](SimRun& s) -> double& { return s.slam.grid.model.l_min; }));
    k.push_back(real_key("grid.l_max", K::kNumber, "log-odds upper clamp", [](SimRun& s) -> double& { return s.slam.grid.model.l_max; }));

    k.push_back({{"match.solver", K::kChoice, "lm or gn_fixed", {"lm", "gn_fixed"}},
                 [](SimRun& s, const Value& v) {
                   s.slam.match.solver = v.word == "lm" ? Solver::kLevenbergMarquardt : Solver::kGaussNewtonFixed;
                 },
                 [](SimRun& s) { return std::string(s.slam.match.solver == Solver::kLevenbergMarquardt ? "lm" : "gn_fixed"); }});
    k.push_back(count_key("match.max_iterations", "iteration cap per level", [](SimRun& s) -> int& { return s.slam.match.max_iterations; }));
    k.push_back(real_key("match.epsilon", K::kNumber, "step-norm stop threshold", [](SimRun& s) -> double& { return s.slam.match.epsilon; }));
    k.push_back(real_key("match.lambda", K::kNumber, "initial damping", [](SimRun& s) -> double& { return s.slam.match.lambda; }));
    k.push_back(real_key("match.lambda_up", K::kNumber, "damping growth on rejection", [](SimRun& s) -> double& { return s.slam.match.lambda_up; }));
    k.push_back(real_key("match.lambda_down", K::kNumber, "damping shrink on acceptance", [](SimRun& s) -> double& { return s.slam.match.lambda_down; }));
    k.push_back(real_key("match.lambda_max", K::kNumber, "damping abort threshold", [](SimRun& s) -> double& { return s.slam.match.lambda_max; }));
    k.push_back(real_key("match.lambda_min", K::kNumber, "damping floor", [](SimRun& s) -> double& { return s.slam.match.lambda_min; }));
    k.push_back(real_key("match.threshold", K::kNumber, "robust cap on the per-point residual", [](SimRun& s) -> double& { return s.slam.match.threshold; }));
    k.push_back({{"match.robust_weights", K::kFlag, "capped weights (default: on for lm, off for gn_fixed)", {}},
                 [](SimRun& s, const Value& v) { s.slam.match.robust_weights = v.flag; },
                 [](SimRun& s) {
                   return s.slam.match.robust_weights ? std::string(*s.slam.match.robust_weights ? "true" : "false") : std::string();
                 }});

    k.push_back(real_key("slam.origin_x", K::kLength, "initial pose x", [](SimRun& s) -> double& { return s.slam.origin.x; }));
    k.push_back(real_key("slam.origin_y", K::kLength, "initial pose y", [](SimRun& s) -> double& { return s.slam.origin.y; }));
    k.push_back(real_key("slam.origin_theta", K::kAngle, "initial heading", [](SimRun& s) -> double& { return s.slam.origin.theta; }));
    k.push_back(real_key("slam.max_translation", K::kLength, "per-frame motion bound", [](SimRun& s) -> double& { return s.slam.max_translation; }));
    k.push_back(real_key("slam.max_rotation", K::kAngle, "per-frame rotation bound", [](SimRun& s) -> double& { return s.slam.max_rotation; }));

    k.push_back(count_key("lidar.channels", "vertical channels", [](SimRun& s) -> int& { return s.lidar.channels; }));
    k.push_back(real_key("lidar.vertical_fov", K::kAngle, "total vertical field of view", [](SimRun& s) -> double& { return s.lidar.vertical_fov; }));
    k.push_back(count_key("lidar.azimuth_bins", "rays per revolution", [](SimRun& s) -> int& { return s.lidar.azimuth_bins; }));
    k.push_back(real_key("lidar.max_range", K::kLength, "detection range", [](SimRun& s) -> double& { return s.lidar.max_range; }));
    k.push_back(real_key("lidar.noise_sigma", K::kLength, "Gaussian range noise", [](SimRun& s) -> double& { return s.lidar.noise_sigma; }));
    k.push_back(real_key("lidar.mount_height", K::kLength, "sensor height above ground", [](SimRun& s) -> double& { return s.lidar.mount_height; }));

    k.push_back(real_key("vehicle.m", K::kNumber, "mass [kg]", [](SimRun& s) -> double& { return s.vehicle.m; }));
    k.push_back(real_key("vehicle.J", K::kNumber, "yaw inertia [kg m^2]", [](SimRun& s) -> double& { return s.vehicle.J; }));
    k.push_back(real_key("vehicle.l_f", K::kLength, "CG to front axle", [](SimRun& s) -> double& { return s.vehicle.l_f; }));
    k.push_back(real_key("vehicle.l_r", K::kLength, "CG to rear axle", [](SimRun& s) -> double& { return s.vehicle.l_r; }));
    k.push_back(real_key("vehicle.C_f", K::kNumber, "front cornering stiffness [N/rad]", [](SimRun& s) -> double& { return s.vehicle.C_f; }));
    k.push_back(real_key("vehicle.C_r", K::kNumber, "rear cornering stiffness [N/rad]", [](SimRun& s) -> double& { return s.vehicle.C_r; }));
    k.push_back(real_key("vehicle.l_s", K::kLength, "preview distance", [](SimRun& s) -> double& { return s.vehicle.l_s; }));

    k.push_back(real_key("pid.kp", K::kNumber, "proportional gain [rad/m]", [](SimRun& s) -> double& { return s.pid.kp; }));
    k.push_back(real_key("pid.ki", K::kNumber, "integral gain [rad/(m s)]", [](SimRun& s) -> double& { return s.pid.ki; }));
    k.push_back(real_key("pid.kd", K::kNumber, "derivative gain [rad s/m]", [](SimRun& s) -> double& { return s.pid.kd; }));
    k.push_back(real_key("pid.delta_max", K::kAngle, "steering saturation", [](SimRun& s) -> double& { return s.pid.delta_max; }));
    k.push_back(real_key("pid.integral_limit", K::kAngle, "integral contribution clamp", [](SimRun& s) -> double& { return s.pid.integral_limit; }));

    k.push_back({{"sim.mode", K::kChoice, "localization source", {"slam", "truth"}},
                 [](SimRun& s, const Value& v) { s.mode = *parse_mode(v.word); },
                 [](SimRun& s) { return to_string(s.mode); }});
    k.push_back(real_key("sim.duration", K::kNumber, "run length cap [s]", [](SimRun& s) -> double& { return s.duration; }));
    k.push_back(real_key("sim.dt", K::kNumber, "control and integration step [s]", [](SimRun& s) -> double& { return s.dt; }));
    k.push_back(count_key("sim.steps_per_frame", "control steps per LIDAR frame", [](SimRun& s) -> int& { return s.steps_per_frame; }));
    k.push_back(real_key("sim.speed", K::kNumber, "commanded speed [m/s]", [](SimRun& s) -> double& { return s.speed; }));
    k.push_back(real_key("sim.speed_tau", K::kNumber, "longitudinal lag [s]", [](SimRun& s) -> double& { return s.speed_tau; }));
    k.push_back(real_key("sim.initial_speed", K::kNumber, "speed at t = 0 [m/s]", [](SimRun& s) -> double& { return s.initial_speed; }));
    k.push_back(count_key("sim.seed", "noise generator seed", [](SimRun& s) -> std::uint64_t& { return s.seed; }));
    k.push_back(count_key("sim.seg_len", "waypoints per path segment", [](SimRun& s) -> int& { return s.seg_len; }));
    k.push_back(real_key("sim.off_path_limit", K::kLength, "abort distance from the path", [](SimRun& s) -> double& { return s.off_path_limit; }));
    return k;
  }();
  return keys;
}

const KeyImpl* find_key(std::string_view name) {
  for (const auto& k : table()) {
    if (k.key.name == name) return &k;
  }
  return nullptr;
}

bool strip_suffix(std::string_view& s, std::string_view suffix) {
  if (s.size() < suffix.size() || s.substr(s.size() - suffix.size()) != suffix) return false;
  s = text::trim(s.substr(0, s.size() - suffix.size()));
  return true;
}

// Returns an error description, empty on success.
std::string parse_value(const ConfigKey& key, std::string_view raw, Value& out) {
  std::string_view s = text::trim(raw);
  switch (key.kind) {
    case ValueKind::kLength:
      strip_suffix(s, "m");
      if (!text::parse_double(s, out.real) || !std::isfinite(out.real)) return "expected a length in metres";
      return {};
    case ValueKind::kAngle: {
      const bool deg = strip_suffix(s, "deg");
      if (!deg) strip_suffix(s, "rad");
      if (!text::parse_double(s, out.real) || !std::isfinite(out.real)) return "expected an angle (radians, or degrees with 'deg')";
      if (deg) out.real *= std::numbers::pi / 180.0;
      return {};
    }
    case ValueKind::kCount: {
      const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out.integer);
      if (s.empty() || ec != std::errc{} || end != s.data() + s.size()) return "expected a non-negative integer";
      return {};
    }
    case ValueKind::kFlag:
      if (s == "true" || s == "yes" || s == "on" || s == "1") {
        out.flag = true;
      } else if (s == "false" || s == "no" || s == "off" || s == "0") {
        out.flag = false;
      } else {
        return "expected a flag (true/false)";
      }
      return {};
    case ValueKind::kNumber:
      if (!text::parse_double(s, out.real) || !std::isfinite(out.real)) return "expected a number";
      return {};
    case ValueKind::kChoice:
      if (std::find(key.choices.begin(), key.choices.end(), s) == key.choices.end()) {
        std::string list;
        for (const auto& c : key.choices) list += (list.empty() ? "" : ", ") + c;
        return "expected one of: " + list;
      }
      out.word = std::string(s);
      return {};
  }
  return "unsupported kind";
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& k : table()) out.push_back(k.key);
    return out;
  }();
  return keys;
}

std::vector<ConfigEntry> parse_config(std::string_view text, const std::string& source) {
  std::vector<ConfigEntry> entries;
  std::set<std::string, std::less<>> seen;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw LogParseError(lineno, "expected 'key = value'", source);
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string value(text::trim(line.substr(eq + 1)));
    if (key.empty() || value.empty()) throw LogParseError(lineno, "expected 'key = value'", source);
    if (!find_key(key)) throw LogParseError(lineno, "unknown key '" + key + "'", source);
    if (!seen.insert(key).second) throw LogParseError(lineno, "duplicate key '" + key + "'", source);
    entries.push_back({key, value, lineno});
  }
  return entries;
}

std::vector<ConfigEntry> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void apply_config(SimRun& settings, const std::vector<ConfigEntry>& entries, const std::string& source) {
  for (const auto& e : entries) {
    const KeyImpl* k = find_key(e.key);
    if (!k) throw LogParseError(e.line, "unknown key '" + e.key + "'", source);
    Value v;
    if (const std::string err = parse_value(k->key, e.value, v); !err.empty()) {
      throw LogParseError(e.line, e.key + ": " + err + ", got '" + e.value + "'", source);
    }
    if (k->key.kind == ValueKind::kCount && v.integer > k->count_max) {
      throw LogParseError(e.line, e.key + ": value out of range, got '" + e.value + "'", source);
    }
    k->set(settings, v);
  }
}

void apply_setting(SimRun& settings, const std::string& key, const std::string& value) {
  apply_config(settings, {{key, value, 0}}, "command line");
}

std::string dump_config(const SimRun& settings) {
  SimRun copy = settings;
  std::string out;
  for (const auto& k : table()) {
    const std::string v = k.get(copy);
    if (v.empty()) {
      out += "# " + k.key.name + " = (default)\n";
    } else {
      out += k.key.name + " = " + v + "\n";
    }
  }
  return out;
}

}  // namespace shuttle
