#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace counterprobe {

std::string_view trim(std::string_view s);
// Drops everything from the first '#' onward.
std::string_view strip_comment(std::string_view line);
std::string ascii_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
// Replaces the first occurrence of `from`; returns the input unchanged if absent.
std::string replace_first(std::string_view s, std::string_view from, std::string_view to);
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);
// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace counterprobe
