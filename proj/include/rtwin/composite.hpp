#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rtwin/binary.hpp"
#include "rtwin/error.hpp"
#include "rtwin/raster_io.hpp"

namespace rtwin {

/// Linear-interpolated percentile of sorted values, p in [0, 100].
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
    require(!sorted.empty(), ErrorCode::InvalidArgument, "percentile of an empty set");
    const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// 8-bit stretch of one band frame: 2nd..98th percentile mapped linearly onto
/// 0..255 with clamping. A degenerate range gives 128; nodata gives 0.
inline std::vector<std::uint8_t> stretch_band(const RasterSeries& series, std::uint32_t t, std::uint32_t band) {
    const std::size_t n = series.frame_size();
    const float* frame = &series.samples[series.index(t, band, 0, 0)];
    std::vector<double> valid;
    for (std::size_t i = 0; i < n; ++i)
        if (!series.is_nodata(frame[i])) valid.push_back(frame[i]);
    std::vector<std::uint8_t> out(n, 0);
    if (valid.empty()) return out;
    std::sort(valid.begin(), valid.end());
    const double lo = percentile_sorted(valid, 2.0);
    const double hi = percentile_sorted(valid, 98.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (series.is_nodata(frame[i])) continue;
        if (!(hi > lo)) {
            out[i] = 128;
            continue;
        }
        const double v = std::round((frame[i] - lo) / (hi - lo) * 255.0);
        out[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return out;
}

/// Binary PPM (P6) with the three given 0-based bands as red, green, blue.
inline std::vector<char> composite_ppm(const RasterSeries& series, std::uint32_t t, std::array<std::uint32_t, 3> bands) {
    require(t < series.t_len, ErrorCode::IndexOutOfRange, "time step " + std::to_string(t) + " out of range");
    for (auto b : bands)
        if (b >= series.bands) fail(ErrorCode::UnknownBand, "band index " + std::to_string(b) + " out of range");
    const std::array<std::vector<std::uint8_t>, 3> rgb{stretch_band(series, t, bands[0]),
                                                      stretch_band(series, t, bands[1]),
                                                      stretch_band(series, t, bands[2])};
    const std::string header = "P6\n" + std::to_string(series.width) + " " + std::to_string(series.height) + "\n255\n";
    std::vector<char> out(header.begin(), header.end());
    out.reserve(header.size() + 3 * series.frame_size());
    for (std::size_t i = 0; i < series.frame_size(); ++i)
        for (const auto& ch : rgb) out.push_back(static_cast<char>(ch[i]));
    return out;
}

inline void write_composite(const RasterSeries& series, std::uint32_t t, std::array<std::uint32_t, 3> bands,
                            const std::filesystem::path& path) {
    detail::write_file(path, composite_ppm(series, t, bands));
}

} // namespace rtwin
