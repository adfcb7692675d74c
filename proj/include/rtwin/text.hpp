#pragma once

#include <charconv>
#include <limits>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "rtwin/error.hpp"

namespace rtwin::detail {

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) fail(ErrorCode::InvalidArgument, "cannot format number");
    return std::string(buf, end);
}

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::vector<std::string_view> lines(std::string_view text) {
    auto out = split(text, '\n');
    if (!out.empty() && out.back().empty()) out.pop_back();
    for (auto& l : out)
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    return out;
}

template <typename T>
T parse_number(std::string_view s, ErrorCode code, std::string_view what) {
    s = trim(s);
    if constexpr (std::is_floating_point_v<T>) {
        if (s == "nan") return std::numeric_limits<T>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<T>::infinity();
        if (s == "-inf") return -std::numeric_limits<T>::infinity();
    }
    T value{};
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && s.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || s.empty())
        fail(code, "cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
    return value;
}

} // namespace rtwin::detail
