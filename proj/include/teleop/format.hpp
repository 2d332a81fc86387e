#ifndef TELEOP_FORMAT_HPP
#define TELEOP_FORMAT_HPP

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

namespace teleop {

/// Shortest decimal representation that round-trips; independent of locale.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Parses the whole of `text` as a double; nullopt on any leftover input.
inline std::optional<double> parse_double(std::string_view text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) return std::nullopt;
    return v;
}

}  // namespace teleop

#endif  // TELEOP_FORMAT_HPP
