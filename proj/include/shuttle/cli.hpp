#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "shuttle/sim.hpp"

namespace shuttle::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitDegraded = 2;

/// Settings shared by the commands: defaults, then the config file, then `--set` overrides.
struct CommonOptions {
  std::string config;               // empty: none
  std::vector<std::string> sets;    // key=value
};

struct SlamOptions {
  CommonOptions common;
  std::string frames;
  std::string out;
  std::optional<std::string> solver;  // lm | gn_fixed
  std::optional<int> iters;
};

struct SimOptions {
  CommonOptions common;
  std::string world = "default";  // file or "default"
  std::string path = "default";   // waypoint CSV or "default"
  std::optional<std::string> mode;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise;
  std::optional<double> duration;
};

struct GenOptions {
  CommonOptions common;
  std::string scenario;
  std::optional<long> frames;  // absent: scenario default
  std::string out;
  std::string truth;  // empty: <out>.truth.csv
  std::optional<std::uint64_t> seed;
  std::optional<double> noise;
};

struct EvalOptions {
  std::vector<std::string> runs;
  std::string truth;  // empty: none
  std::string out;    // CSV, empty: none
};

/// Loads defaults, the config file and overrides. Throws on any invalid input.
SimRun load_settings(const CommonOptions& opts);

int cmd_slam(const SlamOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sim(const SimOptions& opts, std::ostream& out, std::ostream& err);
int cmd_gen(const GenOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_config(const CommonOptions& opts, std::ostream& out, std::ostream& err);

/// Scenario poses (in the frame of the first pose) and the world they are cast in.
struct Scenario {
  World world;
  std::vector<PoseSE2> poses;  // world frame
};
/// static | line | room | loop; absent frames selects the scenario default. Throws
/// std::invalid_argument for an unknown scenario or a non-positive frame count.
Scenario make_scenario(const std::string& name, std::optional<long> frames = std::nullopt);

/// Parses argv (without the program name handling done by the caller) and dispatches.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shuttle::cli
