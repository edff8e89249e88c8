#pragma once

#include <array>
#include <charconv>
#include <string>

namespace virel {

/// Shortest representation that round-trips, with '.' as decimal separator.
inline std::string format_double(double x) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  (void)ec;
  return std::string(buf.data(), ptr);
}

}  // namespace virel
