#include "shuttle/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "shuttle/config.hpp"
#include "shuttle/slam.hpp"
#include "shuttle/text.hpp"

namespace fs = std::filesystem;

namespace shuttle::cli {

SimRun load_settings(const CommonOptions& opts) {
  SimRun s;
  if (!opts.config.empty()) apply_config(s, read_config_file(opts.config), opts.config);
  for (const std::string& kv : opts.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    const std::string key(text::trim(std::string_view(kv).substr(0, eq)));
    const std::string value(text::trim(std::string_view(kv).substr(eq + 1)));
    bool known = false;
    for (const auto& k : config_keys()) known = known || k.name == key;
    if (!known) throw std::invalid_argument("unknown config key '" + key + "'");
    apply_setting(s, key, value);
  }
  return s;
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory '" + dir + "'");
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << content;
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

PoseSE2 relative(const PoseSE2& base, const PoseSE2& p) {
  const double c = std::cos(base.theta), s = std::sin(base.theta);
  const double dx = p.x - base.x, dy = p.y - base.y;
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(p.theta - base.theta)};
}

double mean(const std::vector<double>& v) {
  return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  std::erase_if(v, [](double x) { return std::isnan(x); });
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string cell(double v) { return std::isnan(v) ? std::string() : text::num(v); }

}  // namespace

Scenario make_scenario(const std::string& name, std::optional<long> frames) {
  if (frames && *frames <= 0) throw std::invalid_argument("frame count must be positive");
  Scenario sc;
  if (name == "static") {
    sc.world = make_room_world();
    sc.poses.assign(static_cast<std::size_t>(frames.value_or(5)), PoseSE2{0.0, 0.0, 0.0});
  } else if (name == "line") {
    sc.world = make_room_world();
    const long n = frames.value_or(21);
    for (long i = 0; i < n; ++i) sc.poses.push_back({-0.5 + 0.05 * static_cast<double>(i), 0.0, 0.0});
  } else if (name == "room") {
    sc.world = make_room_world();
    constexpr double radius = 1.5, step = 0.1;
    const long n = frames.value_or(static_cast<long>(std::floor(2.0 * std::numbers::pi * radius / step)) + 1);
    for (long i = 0; i < n; ++i) {
      const double phi = -std::numbers::pi / 2.0 + step / radius * static_cast<double>(i);
      sc.poses.push_back({radius * std::cos(phi), radius * std::sin(phi), wrap_angle(phi + std::numbers::pi / 2.0)});
    }
  } else if (name == "loop") {
    sc.world = make_default_world();
    const std::vector<Vec2> wp = make_default_path();
    const PathSpline path = fit_path(wp);
    const double step = 12.0 / 3.6 * 0.1;
    const long n = frames.value_or(static_cast<long>(std::floor(path.length() / step)) + 1);
    for (long i = 0; i < n; ++i) sc.poses.push_back(path.at_distance(step * static_cast<double>(i)));
  } else {
    throw std::invalid_argument("unknown scenario '" + name + "' (static, line, room, loop)");
  }
  return sc;
}

int cmd_config(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    out << dump_config(load_settings(opts));
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

int cmd_slam(const SlamOptions& opts, std::ostream& out, std::ostream& err) {
  SimRun settings;
  std::vector<PointCloud3D> frames;
  try {
    settings = load_settings(opts.common);
    if (opts.solver) apply_setting(settings, "match.solver", *opts.solver);
    if (opts.iters) {
      if (*opts.iters < 1) throw std::invalid_argument("--iters must be at least 1");
      settings.slam.match.max_iterations = *opts.iters;
    }
    settings.slam.validate();
    frames = read_frame_file(opts.frames);
    ensure_dir(opts.out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }

  SlamSession session(settings.slam);
  std::size_t rejected = 0;
  for (const PointCloud3D& f : frames) {
    try {
      session.process_frame(f);
    } catch (const FrameError& e) {
      ++rejected;
      err << "warning: frame at t=" << text::num(f.timestamp) << " rejected: " << e.what() << '\n';
    }
  }
  std::size_t converged = 0;
  for (const auto& r : session.reports()) {
    if (r.converged) {
      ++converged;
    } else {
      err << "warning: frame at t=" << text::num(r.timestamp) << " did not converge (" << to_string(r.status)
          << (r.motion_rejected ? ", motion bound" : "") << ")\n";
    }
  }
  try {
    export_session(session, opts.out);
    write_text((fs::path(opts.out) / "config_used.txt").string(), dump_config(settings));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  const PoseSE2 p = session.pose();
  out << "frames " << frames.size() << ", processed " << session.reports().size() << ", converged " << converged
      << ", rejected " << rejected << '\n'
      << "final pose " << text::num(p.x) << ' ' << text::num(p.y) << ' ' << text::num(p.theta) << '\n';
  const bool degraded = rejected > 0 || converged < session.reports().size();
  return degraded ? kExitDegraded : kExitOk;
}

int cmd_sim(const SimOptions& opts, std::ostream& out, std::ostream& err) {
  SimRun run;
  try {
    run = load_settings(opts.common);
    if (opts.mode) {
      const auto m = parse_mode(*opts.mode);
      if (!m) throw std::invalid_argument("mode must be slam or truth, got '" + *opts.mode + "'");
      run.mode = *m;
    }
    if (opts.seed) run.seed = *opts.seed;
    if (opts.noise) run.lidar.noise_sigma = *opts.noise;
    if (opts.duration) run.duration = *opts.duration;
    run.world = opts.world == "default" ? make_default_world() : read_world_file(opts.world);
    run.waypoints = opts.path == "default" ? make_default_path() : read_waypoints_csv(opts.path);
    if (run.mode == LocalizationMode::kSlam) run.slam.validate();
    ensure_dir(opts.out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  RunReport rep;
  try {
    rep = run_closed_loop(run);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  try {
    write_run_csv((fs::path(opts.out) / "run.csv").string(), rep);
    write_run_summary((fs::path(opts.out) / "summary.txt").string(), rep);
    write_text((fs::path(opts.out) / "config_used.txt").string(), dump_config(run));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  out << "mode " << to_string(run.mode) << ", samples " << rep.samples.size() << ", rmse_m " << text::num(rep.rmse)
      << ", max_error_m " << text::num(rep.max_error) << ", completed " << (rep.completed ? "yes" : "no") << '\n';
  if (run.mode == LocalizationMode::kSlam) out << "frames converged " << rep.frames_converged << '/' << rep.frames << '\n';
  if (rep.failed) {
    err << "run terminated early: " << rep.failure_reason << '\n';
    return kExitDegraded;
  }
  return kExitOk;
}

int cmd_gen(const GenOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    SimRun settings = load_settings(opts.common);
    if (opts.noise) settings.lidar.noise_sigma = *opts.noise;
    if (opts.seed) settings.seed = *opts.seed;
    settings.lidar.validate();
    const Scenario sc = make_scenario(opts.scenario, opts.frames);
    std::mt19937_64 rng(settings.seed);
    std::vector<PointCloud3D> frames;
    std::vector<TrajectoryEntry> truth;
    for (std::size_t i = 0; i < sc.poses.size(); ++i) {
      const double t = 0.1 * static_cast<double>(i);
      const auto cloud = raycast_frame(sc.world, sc.poses[i], settings.lidar, t, &rng);
      if (!cloud) throw std::invalid_argument("scenario pose " + std::to_string(i) + " lies inside an obstacle");
      frames.push_back(*cloud);
      truth.push_back({t, relative(sc.poses.front(), sc.poses[i]), true, 0.0, 0});
    }
    const std::string truth_path = opts.truth.empty() ? opts.out + ".truth.csv" : opts.truth;
    for (const std::string& f : {opts.out, truth_path}) {
      if (const fs::path parent = fs::path(f).parent_path(); !parent.empty()) ensure_dir(parent.string());
    }
    write_frame_file(opts.out, frames);
    write_trajectory_csv(truth_path, truth);
    out << "wrote " << frames.size() << " frames to " << opts.out << " and truth to " << truth_path << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

namespace {

struct Series {
  std::vector<double> t;
  std::vector<Vec2> pos;
};

struct RunStats {
  std::string name;
  std::string kind;  // slam | sim
  std::size_t frames = 0;
  std::size_t valid = 0;
  double convergence_rate = std::nan("");
  double mean_align_error = std::nan("");
  double mean_iterations = std::nan("");
  double rmse = std::nan("");            // estimate vs truth path
  double endpoint_error = std::nan("");  // estimate vs truth at the last timestamp
  double lateral_rmse = std::nan("");    // sim: truth vs reference path
  double max_lateral = std::nan("");
  double paired_align_delta = std::nan("");
  double paired_iter_delta = std::nan("");
  double paired_lateral_delta = std::nan("");
  std::vector<TrajectoryEntry> traj;  // slam runs
  Series est;
};

double distance_to_polyline(Vec2 q, const std::vector<Vec2>& line) {
  if (line.size() == 1) return std::hypot(q.x - line[0].x, q.y - line[0].y);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const Vec2 a = line[i], b = line[i + 1];
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double u = len2 > 0.0 ? ((q.x - a.x) * vx + (q.y - a.y) * vy) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    best = std::min(best, std::hypot(q.x - a.x - u * vx, q.y - a.y - u * vy));
  }
  return best;
}

RunStats load_run(const std::string& dir) {
  RunStats st;
  st.name = dir;
  const fs::path sim = fs::path(dir) / "run.csv";
  const fs::path traj = fs::path(dir) / "trajectory.csv";
  if (fs::exists(sim)) {
    st.kind = "sim";
    const auto rows = read_run_csv(sim.string());
    std::vector<double> h;
    double sq = 0.0, mx = 0.0;
    for (const auto& r : rows) {
      st.est.t.push_back(r.t);
      st.est.pos.push_back({r.estimate.x, r.estimate.y});
      sq += r.h * r.h;
      mx = std::max(mx, std::abs(r.h));
    }
    st.frames = st.valid = rows.size();
    if (!rows.empty()) {
      st.lateral_rmse = std::sqrt(sq / static_cast<double>(rows.size()));
      st.max_lateral = mx;
    }
  } else if (fs::exists(traj)) {
    st.kind = "slam";
    st.traj = read_trajectory_csv(traj.string());
    st.frames = st.traj.size();
    std::vector<double> err, its;
    std::size_t conv = 0;
    for (std::size_t i = 0; i < st.traj.size(); ++i) {
      const auto& e = st.traj[i];
      st.est.t.push_back(e.timestamp);
      st.est.pos.push_back({e.pose.x, e.pose.y});
      if (i == 0) continue;  // bootstrap frame, nothing matched
      if (e.converged) {
        ++conv;
        err.push_back(e.align_error);
        its.push_back(e.iterations);
      }
    }
    st.valid = err.size();
    if (st.traj.size() > 1) st.convergence_rate = static_cast<double>(conv) / static_cast<double>(st.traj.size() - 1);
    st.mean_align_error = mean(err);
    st.mean_iterations = mean(its);
  } else {
    throw std::runtime_error("'" + dir + "' holds neither run.csv nor trajectory.csv");
  }
  return st;
}

void paired_deltas(RunStats& run, const RunStats& base) {
  if (run.kind == "sim" && base.kind == "sim") {
    run.paired_lateral_delta = run.lateral_rmse - base.lateral_rmse;
    return;
  }
  if (run.kind != "slam" || base.kind != "slam") return;
  std::vector<double> de, di;
  std::size_t j = 0;
  for (std::size_t i = 1; i < run.traj.size(); ++i) {
    const auto& a = run.traj[i];
    while (j < base.traj.size() && base.traj[j].timestamp < a.timestamp - 1e-9) ++j;
    if (j == 0 || j >= base.traj.size()) continue;
    const auto& b = base.traj[j];
    if (std::abs(b.timestamp - a.timestamp) > 1e-9 || !a.converged || !b.converged) continue;
    de.push_back(a.align_error - b.align_error);
    di.push_back(a.iterations - b.iterations);
  }
  run.paired_align_delta = mean(de);
  run.paired_iter_delta = mean(di);
}

}  // namespace

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  std::vector<RunStats> runs;
  try {
    if (opts.runs.empty()) throw std::invalid_argument("no runs given");
    for (const auto& d : opts.runs) runs.push_back(load_run(d));
    if (!opts.truth.empty()) {
      const auto truth = read_trajectory_csv(opts.truth);
      if (truth.empty()) throw std::invalid_argument("truth trajectory is empty");
      std::vector<Vec2> line;
      for (const auto& e : truth) line.push_back({e.pose.x, e.pose.y});
      const double t0 = truth.front().timestamp, t1 = truth.back().timestamp;
      for (auto& r : runs) {
        if (r.est.t.empty()) continue;
        if (r.est.t.front() < t0 - 1e-6 || r.est.t.back() > t1 + 1e-6) {
          err << "error: run '" << r.name << "' spans t=[" << text::num(r.est.t.front()) << ", " << text::num(r.est.t.back())
              << "] outside the truth range [" << text::num(t0) << ", " << text::num(t1) << "]\n";
          return kExitInput;
        }
        double sq = 0.0;
        for (const Vec2& p : r.est.pos) {
          const double d = distance_to_polyline(p, line);
          sq += d * d;
        }
        r.rmse = std::sqrt(sq / static_cast<double>(r.est.pos.size()));
        const double tl = r.est.t.back();
        for (const auto& e : truth) {
          if (std::abs(e.timestamp - tl) <= 1e-6) {
            r.endpoint_error = std::hypot(r.est.pos.back().x - e.pose.x, r.est.pos.back().y - e.pose.y);
          }
        }
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  for (std::size_t i = 1; i < runs.size(); ++i) paired_deltas(runs[i], runs[0]);

  std::ostringstream csv;
  csv << "run,kind,frames,valid,convergence_rate,mean_align_error,mean_iterations,rmse_m,endpoint_error_m,"
         "lateral_rmse_m,max_lateral_m,paired_align_delta,paired_iter_delta,paired_lateral_delta\n";
  auto row = [&](const std::string& name, const std::string& kind, const std::string& frames, const std::string& valid,
                 const RunStats& s) {
    csv << name << ',' << kind << ',' << frames << ',' << valid << ',' << cell(s.convergence_rate) << ','
        << cell(s.mean_align_error) << ',' << cell(s.mean_iterations) << ',' << cell(s.rmse) << ','
        << cell(s.endpoint_error) << ',' << cell(s.lateral_rmse) << ',' << cell(s.max_lateral) << ','
        << cell(s.paired_align_delta) << ',' << cell(s.paired_iter_delta) << ',' << cell(s.paired_lateral_delta) << '\n';
  };
  for (const auto& r : runs) row(r.name, r.kind, std::to_string(r.frames), std::to_string(r.valid), r);
  if (runs.size() > 1) {
    RunStats med;
    auto col = [&](double RunStats::*m) {
      std::vector<double> v;
      for (const auto& r : runs) v.push_back(r.*m);
      return median(v);
    };
    med.convergence_rate = col(&RunStats::convergence_rate);
    med.mean_align_error = col(&RunStats::mean_align_error);
    med.mean_iterations = col(&RunStats::mean_iterations);
    med.rmse = col(&RunStats::rmse);
    med.endpoint_error = col(&RunStats::endpoint_error);
    med.lateral_rmse = col(&RunStats::lateral_rmse);
    med.max_lateral = col(&RunStats::max_lateral);
    std::vector<double> pa, pi, pl;
    for (std::size_t i = 1; i < runs.size(); ++i) {
      pa.push_back(runs[i].paired_align_delta);
      pi.push_back(runs[i].paired_iter_delta);
      pl.push_back(runs[i].paired_lateral_delta);
    }
    med.paired_align_delta = median(pa);
    med.paired_iter_delta = median(pi);
    med.paired_lateral_delta = median(pl);
    row("median", "", "", "", med);
  }
  out << csv.str();
  if (!opts.out.empty()) {
    try {
      write_text(opts.out, csv.str());
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitInput;
    }
  }
  return kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"2D LIDAR SLAM and closed-loop path following on synthetic worlds", "shuttle-slam"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  auto add_common = [](CLI::App* sub, CommonOptions& c) {
    sub->add_option("--config", c.config, "Key-value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", c.sets, "Override a config key (key=value), repeatable");
  };

  SlamOptions slam;
  auto* s = app.add_subcommand("slam", "Run SLAM over a frame log");
  s->add_option("--frames", slam.frames, "Frame log")->required();
  s->add_option("--out", slam.out, "Output directory")->required();
  s->add_option("--solver", slam.solver, "lm or gn_fixed")->check(CLI::IsMember({"lm", "gn_fixed"}));
  s->add_option("--iters", slam.iters, "Iteration cap per level");
  add_common(s, slam.common);

  SimOptions sim;
  auto* m = app.add_subcommand("sim", "Run a closed-loop path-following simulation");
  m->add_option("--world", sim.world, "World file or 'default'");
  m->add_option("--path", sim.path, "Waypoint CSV or 'default'");
  m->add_option("--mode", sim.mode, "slam or truth")->check(CLI::IsMember({"slam", "truth"}));
  m->add_option("--out", sim.out, "Output directory")->required();
  m->add_option("--seed", sim.seed, "Noise seed");
  m->add_option("--noise", sim.noise, "LIDAR range noise sigma [m]");
  m->add_option("--duration", sim.duration, "Run length cap [s]");
  add_common(m, sim.common);

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Raycast a canned scenario into a frame log");
  g->add_option("--scenario", gen.scenario, "static, line, room or loop")
      ->required()
      ->check(CLI::IsMember({"static", "line", "room", "loop"}));
  g->add_option("--frames", gen.frames, "Frame count");
  g->add_option("--out", gen.out, "Frame log to write")->required();
  g->add_option("--truth", gen.truth, "Truth trajectory CSV (default <out>.truth.csv)");
  g->add_option("--seed", gen.seed, "Noise seed");
  g->add_option("--noise", gen.noise, "LIDAR range noise sigma [m]");
  add_common(g, gen.common);

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Summarise and compare run outputs");
  e->add_option("--runs", ev.runs, "Run output directories")->required();
  e->add_option("--truth", ev.truth, "Truth trajectory CSV");
  e->add_option("--out", ev.out, "Summary CSV to write");

  CommonOptions cfg;
  auto* c = app.add_subcommand("config", "Print the effective configuration");
  add_common(c, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) return app.exit(ex, out, err);
    err << "error: " << ex.what() << '\n';
    const CLI::App* sub = nullptr;
    for (const auto* cand : app.get_subcommands()) sub = cand;
    err << (sub ? sub->help() : app.help());
    return kExitInput;
  }

  if (s->parsed()) return cmd_slam(slam, out, err);
  if (m->parsed()) return cmd_sim(sim, out, err);
  if (g->parsed()) return cmd_gen(gen, out, err);
  if (e->parsed()) return cmd_eval(ev, out, err);
  return cmd_config(cfg, out, err);
}

}  // namespace shuttle::cli
