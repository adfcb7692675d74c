#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "rtwin/error.hpp"
#include "rtwin/model.hpp"
#include "rtwin/tiling.hpp"

namespace rtwin {

enum class StitchWeighting { Uniform, Feathered };

struct StitchResult {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<double> values;        // NaN where no tile covers the pixel
    std::vector<std::uint32_t> weight; // covering-tile count per pixel
};

/// Feathered weight of a window pixel: 1 + distance to the nearest window edge.
inline double feather_weight(std::uint32_t r, std::uint32_t c, std::uint32_t window) {
    return 1.0 + std::min({r, c, window - 1 - r, window - 1 - c});
}

/// Reassembles per-tile frames (indexed by tile id) into one raster,
/// averaging wherever tiles overlap. Tiles are accumulated in id order.
inline StitchResult stitch(const TilePlan& plan, std::span<const Frame> tiles, std::uint32_t height,
                           std::uint32_t width, StitchWeighting weighting = StitchWeighting::Uniform) {
    require(plan.height == height && plan.width == width, ErrorCode::DimensionMismatch,
            "plan dimensions differ from the stitch target");
    if (tiles.size() < plan.size())
        fail(ErrorCode::MissingTile, "plan has " + std::to_string(plan.size()) + " tiles, got frames for " +
                                         std::to_string(tiles.size()));
    const std::size_t cells = static_cast<std::size_t>(height) * width;
    const std::size_t win = plan.window;
    StitchResult out{height, width, std::vector<double>(cells, 0.0), std::vector<std::uint32_t>(cells, 0)};
    std::vector<double> wsum(cells, 0.0);
    for (const auto& t : plan.tiles) {
        const auto& f = tiles[t.id];
        require(f.size() == win * win, ErrorCode::DimensionMismatch,
                "frame for tile " + std::to_string(t.id) + " is not window x window");
        for (std::uint32_t r = 0; r < win; ++r)
            for (std::uint32_t c = 0; c < win; ++c) {
                const std::size_t k = static_cast<std::size_t>(t.row + r) * width + t.col + c;
                const double w = weighting == StitchWeighting::Uniform ? 1.0 : feather_weight(r, c, plan.window);
                out.values[k] += w * f[r * win + c];
                wsum[k] += w;
                ++out.weight[k];
            }
    }
    for (std::size_t k = 0; k < cells; ++k)
        out.values[k] = out.weight[k] ? out.values[k] / wsum[k] : std::numeric_limits<double>::quiet_NaN();
    return out;
}

/// Crops every plan window out of a single H x W frame (row-major).
inline std::vector<Frame> cut_tiles(const TilePlan& plan, std::span<const double> frame) {
    require(frame.size() == static_cast<std::size_t>(plan.height) * plan.width, ErrorCode::DimensionMismatch,
            "frame size does not match the plan");
    std::vector<Frame> out;
    out.reserve(plan.size());
    for (const auto& t : plan.tiles) {
        Frame f;
        f.reserve(static_cast<std::size_t>(plan.window) * plan.window);
        for (std::uint32_t r = 0; r < plan.window; ++r) {
            const auto* row = &frame[static_cast<std::size_t>(t.row + r) * plan.width + t.col];
            f.insert(f.end(), row, row + plan.window);
        }
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace rtwin
