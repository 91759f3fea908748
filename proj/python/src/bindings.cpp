#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "shuttle/cli.hpp"
#include "shuttle/config.hpp"
#include "shuttle/matcher.hpp"
#include "shuttle/scan.hpp"
#include "shuttle/sim.hpp"
#include "shuttle/slam.hpp"
#include "shuttle/vehicle.hpp"
#include "shuttle/world.hpp"

namespace py = pybind11;
using namespace shuttle;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointCloud3D to_cloud(const Array& pts, double timestamp) {
  if (pts.ndim() != 2 || pts.shape(1) != 3) throw std::invalid_argument("points must have shape (N, 3)");
  PointCloud3D c;
  c.timestamp = timestamp;
  const auto r = pts.unchecked<2>();
  c.points.reserve(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) c.points.push_back({r(i, 0), r(i, 1), r(i, 2)});
  return c;
}

Array from_cloud(const PointCloud3D& c) {
  Array out({static_cast<py::ssize_t>(c.points.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto k = static_cast<py::ssize_t>(i);
    w(k, 0) = c.points[i].x;
    w(k, 1) = c.points[i].y;
    w(k, 2) = c.points[i].z;
  }
  return out;
}

std::vector<Vec2> to_points2(const Array& pts) {
  if (pts.ndim() != 2 || pts.shape(1) != 2) throw std::invalid_argument("points must have shape (N, 2)");
  std::vector<Vec2> out;
  const auto r = pts.unchecked<2>();
  for (py::ssize_t i = 0; i < r.shape(0); ++i) out.push_back({r(i, 0), r(i, 1)});
  return out;
}

SimRun settings_from(const std::map<std::string, std::string>& settings) {
  SimRun s;
  for (const auto& [k, v] : settings) apply_setting(s, k, v);
  return s;
}

py::tuple pose_tuple(const PoseSE2& p) { return py::make_tuple(p.x, p.y, p.theta); }

PoseSE2 pose_from(const std::array<double, 3>& p) { return {p[0], p[1], p[2]}; }

py::dict report_dict(const FrameReport& r) {
  py::dict d;
  d["timestamp"] = r.timestamp;
  d["pose"] = pose_tuple(r.pose);
  d["converged"] = r.converged;
  d["status"] = to_string(r.status);
  d["alignment_error"] = r.alignment_error;
  d["iterations"] = r.iterations;
  d["total_iterations"] = r.total_iterations;
  d["raw_points"] = r.raw_points;
  d["kept_points"] = r.kept_points;
  d["projected_points"] = r.projected_points;
  d["map_updated"] = r.map_updated;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "2D LIDAR SLAM, occupancy pyramids, LM scan matching and closed-loop path following";

  py::register_exception<FrameError>(m, "FrameError", PyExc_ValueError);
  py::register_exception<LogParseError>(m, "ParseError", PyExc_ValueError);

  m.def(
      "remove_ground",
      [](const Array& pts, double cell_size, double h_thres) {
        return from_cloud(remove_ground(to_cloud(pts, 0.0), cell_size, h_thres));
      },
      py::arg("points"), py::arg("cell_size") = 0.2, py::arg("h_thres") = 0.3,
      "Keep points whose height-grid cell spans at least h_thres vertically.");

  m.def(
      "project_to_scan",
      [](const Array& pts, double bin_width, double max_range) {
        const PlanarScan s = project_to_scan(to_cloud(pts, 0.0), bin_width, max_range);
        py::array_t<double> ranges(static_cast<py::ssize_t>(s.bin_count()));
        auto w = ranges.mutable_unchecked<1>();
        for (std::size_t i = 0; i < s.bin_count(); ++i) {
          w(static_cast<py::ssize_t>(i)) = s[i] ? s[i]->range : std::numeric_limits<double>::quiet_NaN();
        }
        return ranges;
      },
      py::arg("points"), py::arg("bin_width") = ScanConfig{}.bin_width, py::arg("max_range") = 80.0,
      "Per-bin minimum range (NaN for empty bins); bin i is centred on -pi + i * bin_width.");

  m.def(
      "transform_endpoint",
      [](const std::array<double, 3>& pose, const std::array<double, 2>& s) {
        const Vec2 p = transform_endpoint(pose_from(pose), {s[0], s[1]});
        return py::make_tuple(p.x, p.y);
      },
      py::arg("pose"), py::arg("point"));

  m.def(
      "interpolate",
      [](const Array& probabilities, double resolution, const std::array<double, 2>& origin,
         const std::array<double, 2>& p) -> py::object {
        if (probabilities.ndim() != 2) throw std::invalid_argument("grid must be 2-D (rows = y, cols = x)");
        const auto r = probabilities.unchecked<2>();
        OccupancyGrid g(resolution, {origin[0], origin[1]}, static_cast<std::size_t>(r.shape(1)),
                        static_cast<std::size_t>(r.shape(0)));
        for (py::ssize_t y = 0; y < r.shape(0); ++y) {
          for (py::ssize_t x = 0; x < r.shape(1); ++x) g.set_probability({x, y}, r(y, x));
        }
        const auto res = g.interpolate({p[0], p[1]});
        if (!res) return py::none();
        return py::make_tuple(res->value, py::make_tuple(res->gradient.x, res->gradient.y));
      },
      py::arg("probabilities"), py::arg("resolution"), py::arg("origin"), py::arg("point"),
      "Bilinear occupancy value and gradient at a world point, or None outside the grid.");

  py::class_<SlamSession>(m, "SlamSession")
      .def(py::init([](const std::map<std::string, std::string>& settings) { return SlamSession(settings_from(settings).slam); }),
           py::arg("settings") = std::map<std::string, std::string>{},
           "Settings use the config-file keys, e.g. {'grid.size': '60', 'match.solver': 'gn_fixed'}.")
      .def(
          "process_frame",
          [](SlamSession& s, double timestamp, const Array& pts) { return report_dict(s.process_frame(to_cloud(pts, timestamp))); },
          py::arg("timestamp"), py::arg("points"))
      .def_property_readonly("pose", [](const SlamSession& s) { return pose_tuple(s.pose()); })
      .def_property_readonly("trajectory",
                             [](const SlamSession& s) {
                               py::list out;
                               for (const auto& e : s.trajectory()) {
                                 out.append(py::make_tuple(e.timestamp, e.pose.x, e.pose.y, e.pose.theta, e.converged,
                                                           e.align_error, e.iterations));
                               }
                               return out;
                             })
      .def("export", [](const SlamSession& s, const std::string& dir) { export_session(s, dir); }, py::arg("dir"));

  py::class_<World>(m, "World")
      .def_static("default", &make_default_world)
      .def_static("room", &make_room_world)
      .def_static("parse", &parse_world, py::arg("text"))
      .def_property_readonly("obstacle_count", [](const World& w) { return w.obstacles.size(); })
      .def("inside_obstacle", [](const World& w, double x, double y) { return w.inside_obstacle({x, y}); });

  m.def(
      "raycast_frame",
      [](const World& w, const std::array<double, 3>& pose, const std::map<std::string, std::string>& settings,
         double timestamp, std::uint64_t seed) -> py::object {
        const SimRun s = settings_from(settings);
        std::mt19937_64 rng(seed);
        const auto c = raycast_frame(w, pose_from(pose), s.lidar, timestamp, &rng);
        if (!c) return py::none();
        return from_cloud(*c);
      },
      py::arg("world"), py::arg("pose"), py::arg("settings") = std::map<std::string, std::string>{},
      py::arg("timestamp") = 0.0, py::arg("seed") = 1, "Sensor-frame points, or None if the sensor is inside an obstacle.");

  m.def(
      "lateral_dynamics",
      [](const Eigen::Vector4d& x, double delta_f, double rho_ref, double speed) {
        VehicleParams p;
        p.V = speed;
        return Eigen::Vector4d(lateral_dynamics(x, delta_f, rho_ref, p));
      },
      py::arg("state"), py::arg("delta_f"), py::arg("rho_ref") = 0.0, py::arg("speed") = VehicleParams{}.V);

  m.def(
      "steady_state",
      [](double delta_f, double speed) {
        VehicleParams p;
        p.V = speed;
        const SteadyState ss = steady_state(p, delta_f);
        return py::make_tuple(ss.beta, ss.r);
      },
      py::arg("delta_f"), py::arg("speed") = VehicleParams{}.V);

  py::class_<PathSpline>(m, "PathSpline")
      .def_property_readonly("segment_count", &PathSpline::size)
      .def_property_readonly("residual_rms", &PathSpline::residual_rms)
      .def_property_readonly("length", &PathSpline::length)
      .def(
          "position",
          [](const PathSpline& p, std::size_t seg, double l) {
            const Vec2 v = p.segments().at(seg).position(l);
            return py::make_tuple(v.x, v.y);
          },
          py::arg("segment"), py::arg("lam"))
      .def(
          "error",
          [](const PathSpline& p, const std::array<double, 3>& pose, double l_s) -> py::object {
            const auto e = path_error(p, pose_from(pose), l_s);
            if (!e) return py::none();
            return py::make_tuple(e->h, e->dpsi, e->y);
          },
          py::arg("pose"), py::arg("l_s") = 2.0, "(h, dpsi, y), or None when off the path.");

  m.def(
      "fit_path", [](const Array& pts, int seg_len) { return fit_path(to_points2(pts), seg_len); }, py::arg("waypoints"),
      py::arg("seg_len") = 10);
  m.def("default_path", [] {
    const auto pts = make_default_path();
    Array out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      w(static_cast<py::ssize_t>(i), 0) = pts[i].x;
      w(static_cast<py::ssize_t>(i), 1) = pts[i].y;
    }
    return out;
  });

  m.def("command_filter", &command_filter, py::arg("prev"), py::arg("new"));

  m.def(
      "run_closed_loop",
      [](const std::string& mode, const std::map<std::string, std::string>& settings, double duration) {
        SimRun run = settings_from(settings);
        const auto md = parse_mode(mode);
        if (!md) throw std::invalid_argument("mode must be 'slam' or 'truth'");
        run.mode = *md;
        run.duration = duration;
        run.world = make_default_world();
        run.waypoints = make_default_path();
        RunReport rep;
        {
          py::gil_scoped_release release;
          rep = run_closed_loop(run);
        }
        py::dict d;
        d["rmse"] = rep.rmse;
        d["max_error"] = rep.max_error;
        d["failed"] = rep.failed;
        d["failure_reason"] = rep.failure_reason;
        d["completed"] = rep.completed;
        d["samples"] = rep.samples.size();
        d["frames"] = rep.frames;
        d["frames_converged"] = rep.frames_converged;
        return d;
      },
      py::arg("mode") = "truth", py::arg("settings") = std::map<std::string, std::string>{}, py::arg("duration") = 300.0,
      "Closed loop on the default world and loop path.");

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"shuttle-slam"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command-line invocation in-process; returns (exit_code, stdout, stderr).");
}
