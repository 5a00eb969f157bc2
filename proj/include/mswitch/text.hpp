#ifndef MSWITCH_TEXT_HPP
#define MSWITCH_TEXT_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mswitch {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

std::string join_doubles(std::span<const double> values, std::string_view sep = ",");

std::uint64_t fnv1a64(std::string_view data);

std::string hex64(std::uint64_t v);

std::string trim(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

/// Strict full-string numeric parses; throw std::invalid_argument naming `what`.
double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);

}  // namespace mswitch

#endif  // MSWITCH_TEXT_HPP
