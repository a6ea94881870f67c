#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace divad {

/// Shortest text that parses back to exactly `value`. Infinities print as
/// `inf` / `-inf`.
inline std::string format_double(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return "nan";
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return {buffer, result.ptr};
}

}  // namespace divad
