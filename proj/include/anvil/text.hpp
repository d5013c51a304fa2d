#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace anvil::text {

std::string_view trim(std::string_view s);

// Splits on LF, dropping a trailing CR from each line. A final empty
// segment after the last LF is not reported.
std::vector<std::string_view> split_lines(std::string_view s);

// Trims and collapses internal runs of ASCII whitespace to one space.
std::string collapse_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string to_lower(std::string_view s);

// 64-bit FNV-1a. Stable across platforms; used for content digests.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex(std::uint64_t value);

// n / d rendered with `places` decimals, rounded half-up and computed
// in integer arithmetic so that displayed rates never depend on binary
// floating point. Requires d > 0 and n >= 0.
std::string format_ratio(std::uint64_t n, std::uint64_t d, int places);

std::string format_fixed(double value, int places);

// Renders 5782441 as "5,782,441".
std::string group_thousands(std::int64_t value);

}  // namespace anvil::text
