#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace shuttle::text {

/// Decimal text with 9 significant digits, the precision of every file this library writes.
std::string num(double v);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_ws(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Strict number parse: the whole token must be consumed.
bool parse_double(std::string_view s, double& out);
bool parse_long(std::string_view s, long& out);

}  // namespace shuttle::text
