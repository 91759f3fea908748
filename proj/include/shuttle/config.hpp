#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "shuttle/sim.hpp"

namespace shuttle {

/// Value kinds accepted by the key-value config.
/// length: metres, optional `m` suffix. angle: radians, or degrees with a `deg` suffix.
/// count: non-negative integer. flag: true/false, yes/no, on/off, 1/0.
/// number: any finite real. choice: one of a fixed word list.
enum class ValueKind { kLength, kAngle, kCount, kFlag, kNumber, kChoice };

struct ConfigKey {
  std::string name;
  ValueKind kind;
  std::string help;
  std::vector<std::string> choices;  // kChoice only
};

/// Every recognised key, in file order of `dump_config`.
const std::vector<ConfigKey>& config_keys();

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped. Unknown
/// keys, malformed lines and duplicate keys raise LogParseError with the line number.
std::vector<ConfigEntry> parse_config(std::string_view text, const std::string& source = {});
std::vector<ConfigEntry> read_config_file(const std::string& path);

/// Type-checks and applies entries in order. Throws LogParseError (with the entry's line)
/// on a value of the wrong kind.
void apply_config(SimRun& settings, const std::vector<ConfigEntry>& entries, const std::string& source = {});

/// Applies a single `key=value` override (line 0 in diagnostics).
void apply_setting(SimRun& settings, const std::string& key, const std::string& value);

/// All keys with their current values, one `key = value` per line; parses back to the same settings.
std::string dump_config(const SimRun& settings);

}  // namespace shuttle
