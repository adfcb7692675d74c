#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtwin/binary.hpp"
#include "rtwin/error.hpp"
#include "rtwin/raster_io.hpp"
#include "rtwin/text.hpp"
#include "rtwin/tiling.hpp"

namespace rtwin {

struct BandStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double variance = 0.0;

    bool degenerate() const { return !(max > min); }

    friend bool operator==(const BandStats&, const BandStats&) = default;
};

/// Per (tile, band) temporal statistics, stored tile-major.
struct NormStats {
    std::uint32_t tiles = 0;
    std::uint32_t bands = 0;
    std::vector<BandStats> entries;

    const BandStats& at(std::size_t tile_id, std::size_t band) const {
        if (tile_id >= tiles) fail(ErrorCode::UnknownTile, "no statistics for tile " + std::to_string(tile_id));
        if (band >= bands) fail(ErrorCode::UnknownBand, "no statistics for band " + std::to_string(band));
        return entries[tile_id * bands + band];
    }

    friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct NormalizedWindow {
    std::vector<double> values; // window*window, row-major, in [0, 1]
    bool degenerate_range = false;
};

namespace detail {

inline void check_plan_matches(const RasterSeries& series, const TilePlan& plan) {
    require(plan.height == series.height && plan.width == series.width, ErrorCode::DimensionMismatch,
            "plan is for a " + std::to_string(plan.height) + "x" + std::to_string(plan.width) + " raster, series is " +
                std::to_string(series.height) + "x" + std::to_string(series.width));
}

inline const TileRect& tile_at(const TilePlan& plan, std::size_t tile_id) {
    if (tile_id >= plan.tiles.size()) fail(ErrorCode::UnknownTile, "tile " + std::to_string(tile_id) + " is not in the plan");
    return plan.tiles[tile_id];
}

} // namespace detail

/// Raw samples of one tile window (nodata left as-is), row-major.
inline std::vector<float> crop_window(const RasterSeries& series, const TilePlan& plan, std::size_t tile_id,
                                      std::size_t band, std::size_t t) {
    detail::check_plan_matches(series, plan);
    const auto& tile = detail::tile_at(plan, tile_id);
    if (band >= series.bands) fail(ErrorCode::UnknownBand, "band " + std::to_string(band) + " out of range");
    require(t < series.t_len, ErrorCode::IndexOutOfRange, "time step " + std::to_string(t) + " out of range");
    std::vector<float> out;
    out.reserve(static_cast<std::size_t>(plan.window) * plan.window);
    for (std::uint32_t r = 0; r < plan.window; ++r) {
        const auto* row = &series.samples[series.index(t, band, tile.row + r, tile.col)];
        out.insert(out.end(), row, row + plan.window);
    }
    return out;
}

/// Population statistics of every (tile, band) over the time steps in `range`
/// (all steps when omitted), skipping nodata samples.
inline NormStats fit_stats(const RasterSeries& series, const TilePlan& plan,
                           std::optional<TimeRange> fit_range = std::nullopt) {
    detail::check_plan_matches(series, plan);
    const TimeRange range = fit_range.value_or(TimeRange{0, series.t_len});
    require(range.size() >= 1 && range.end <= series.t_len, ErrorCode::InvalidArgument, "fit range is outside the series");

    NormStats stats{static_cast<std::uint32_t>(plan.size()), series.bands, {}};
    stats.entries.resize(plan.size() * series.bands);
    for (const auto& tile : plan.tiles)
        for (std::uint32_t b = 0; b < series.bands; ++b) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            double sum = 0.0;
            std::size_t n = 0;
            for (auto t = range.begin; t < range.end; ++t)
                for (std::uint32_t r = 0; r < plan.window; ++r)
                    for (std::uint32_t c = 0; c < plan.window; ++c) {
                        const float v = series.at(t, b, tile.row + r, tile.col + c);
                        if (series.is_nodata(v)) continue;
                        lo = std::min<double>(lo, v);
                        hi = std::max<double>(hi, v);
                        sum += v;
                        ++n;
                    }
            if (n == 0)
                fail(ErrorCode::AllNodataTile,
                     "tile " + std::to_string(tile.id) + " band " + std::to_string(b) + " has no valid samples");
            const double mean = sum / static_cast<double>(n);
            double ss = 0.0;
            for (auto t = range.begin; t < range.end; ++t)
                for (std::uint32_t r = 0; r < plan.window; ++r)
                    for (std::uint32_t c = 0; c < plan.window; ++c) {
                        const float v = series.at(t, b, tile.row + r, tile.col + c);
                        if (!series.is_nodata(v)) ss += (v - mean) * (v - mean);
                    }
            // Rounding in the mean can put it a hair outside [min, max] for constant tiles.
            stats.entries[tile.id * series.bands + b] = {lo, hi, std::clamp(mean, lo, hi), ss / static_cast<double>(n)};
        }
    return stats;
}

/// Max-min scaling of one tile window to [0, 1]. Nodata maps to 0; values
/// outside the fitted range clamp. A constant tile yields all zeros and sets
/// degenerate_range.
inline NormalizedWindow apply(const RasterSeries& series, const TilePlan& plan, const NormStats& stats,
                              std::size_t tile_id, std::size_t band, std::size_t t) {
    const auto& s = stats.at(tile_id, band);
    const auto raw = crop_window(series, plan, tile_id, band, t);
    NormalizedWindow out{std::vector<double>(raw.size(), 0.0), s.degenerate()};
    if (out.degenerate_range) return out;
    const double span = s.max - s.min;
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (!series.is_nodata(raw[i])) out.values[i] = std::clamp((raw[i] - s.min) / span, 0.0, 1.0);
    return out;
}

/// Back to sensor units: x = x' * (max - min) + min; constant tiles give min.
inline std::vector<double> invert(std::span<const double> window, const NormStats& stats, std::size_t tile_id,
                                  std::size_t band) {
    const auto& s = stats.at(tile_id, band);
    std::vector<double> out(window.size(), s.min);
    if (s.degenerate()) return out;
    for (std::size_t i = 0; i < window.size(); ++i) out[i] = window[i] * (s.max - s.min) + s.min;
    return out;
}

// Stats text file: one "tile_id,band,min,max,mean,variance" line per pair.

inline std::string format_stats(const NormStats& stats) {
    std::string out;
    for (std::uint32_t t = 0; t < stats.tiles; ++t)
        for (std::uint32_t b = 0; b < stats.bands; ++b) {
            const auto& s = stats.entries[t * stats.bands + b];
            out += std::to_string(t) + "," + std::to_string(b) + "," + detail::format_double(s.min) + "," +
                   detail::format_double(s.max) + "," + detail::format_double(s.mean) + "," +
                   detail::format_double(s.variance) + "\n";
        }
    return out;
}

inline NormStats parse_stats(std::string_view text) {
    struct Row {
        std::uint32_t tile, band;
        BandStats s;
    };
    std::vector<Row> rows;
    std::uint32_t tiles = 0, bands = 0;
    const auto ls = detail::lines(text);
    for (std::size_t i = 0; i < ls.size(); ++i) {
        const auto parts = detail::split(ls[i], ',');
        require(parts.size() == 6, ErrorCode::BadRecord, "stats line " + std::to_string(i + 1) + " must have 6 fields");
        Row row{};
        row.tile = detail::parse_number<std::uint32_t>(parts[0], ErrorCode::BadRecord, "tile id");
        row.band = detail::parse_number<std::uint32_t>(parts[1], ErrorCode::BadRecord, "band");
        row.s.min = detail::parse_number<double>(parts[2], ErrorCode::BadRecord, "min");
        row.s.max = detail::parse_number<double>(parts[3], ErrorCode::BadRecord, "max");
        row.s.mean = detail::parse_number<double>(parts[4], ErrorCode::BadRecord, "mean");
        row.s.variance = detail::parse_number<double>(parts[5], ErrorCode::BadRecord, "variance");
        tiles = std::max(tiles, row.tile + 1);
        bands = std::max(bands, row.band + 1);
        rows.push_back(row);
    }
    NormStats stats{tiles, bands, std::vector<BandStats>(static_cast<std::size_t>(tiles) * bands)};
    std::vector<std::uint8_t> seen(stats.entries.size(), 0);
    for (const auto& row : rows) {
        const std::size_t k = static_cast<std::size_t>(row.tile) * bands + row.band;
        require(!seen[k], ErrorCode::BadRecord, "duplicate stats entry for tile " + std::to_string(row.tile));
        seen[k] = 1;
        stats.entries[k] = row.s;
    }
    require(std::all_of(seen.begin(), seen.end(), [](auto v) { return v != 0; }), ErrorCode::BadRecord,
            "stats file is missing (tile, band) entries");
    return stats;
}

inline void write_stats(const NormStats& stats, const std::filesystem::path& path) {
    detail::write_text(path, format_stats(stats));
}

inline NormStats read_stats(const std::filesystem::path& path) { return parse_stats(detail::read_text(path)); }

} // namespace rtwin
