#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rtwin/binary.hpp"
#include "rtwin/error.hpp"
#include "rtwin/raster_io.hpp"
#include "rtwin/text.hpp"

namespace rtwin {

enum class TileOrigin { Scan, Completion };

struct TileRect {
    std::uint32_t id = 0;
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    TileOrigin origin = TileOrigin::Scan;

    friend bool operator==(const TileRect&, const TileRect&) = default;
};

struct TilePlan {
    std::uint32_t window = 0;
    std::uint32_t stride = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<TileRect> tiles;

    std::size_t size() const { return tiles.size(); }

    friend bool operator==(const TilePlan&, const TilePlan&) = default;
};

namespace detail {

inline void check_window(std::uint32_t height, std::uint32_t width, std::uint32_t window) {
    require(window >= 1, ErrorCode::InvalidArgument, "window must be >= 1");
    if (window > std::min(height, width))
        fail(ErrorCode::WindowTooLarge, "window " + std::to_string(window) + " exceeds raster " +
                                            std::to_string(height) + "x" + std::to_string(width));
}

/// Summed-area table over a 0/1 grid; sum() answers window counts in O(1).
class IntegralCount {
public:
    IntegralCount(std::uint32_t height, std::uint32_t width) : h_(height), w_(width), sat_((h_ + 1) * (w_ + 1), 0) {}

    template <typename Pred>
    void rebuild(Pred&& pred) {
        for (std::size_t r = 0; r < h_; ++r) {
            std::int64_t row_sum = 0;
            for (std::size_t c = 0; c < w_; ++c) {
                row_sum += pred(r, c) ? 1 : 0;
                sat_[(r + 1) * (w_ + 1) + c + 1] = sat_[r * (w_ + 1) + c + 1] + row_sum;
            }
        }
    }

    std::int64_t sum(std::size_t r0, std::size_t c0, std::size_t size) const {
        const std::size_t r1 = r0 + size, c1 = c0 + size;
        return sat_[r1 * (w_ + 1) + c1] - sat_[r0 * (w_ + 1) + c1] - sat_[r1 * (w_ + 1) + c0] + sat_[r0 * (w_ + 1) + c0];
    }

private:
    std::size_t h_, w_;
    std::vector<std::int64_t> sat_;
};

inline std::vector<std::uint32_t> scan_positions(std::uint32_t extent, std::uint32_t window, std::uint32_t stride) {
    std::vector<std::uint32_t> pos;
    const std::uint32_t last = extent - window;
    for (std::uint32_t p = 0; p < last; p += stride) pos.push_back(p);
    pos.push_back(last);
    return pos;
}

inline void mark_covered(std::vector<std::uint8_t>& covered, std::uint32_t width, const TileRect& t, std::uint32_t window) {
    for (std::uint32_t r = t.row; r < t.row + window; ++r)
        std::fill_n(covered.begin() + static_cast<std::ptrdiff_t>(r) * width + t.col, window, std::uint8_t{1});
}

} // namespace detail

/// Sliding-window scan: candidates at multiples of stride with the last one
/// clamped to the raster edge; keeps windows holding >= 1 mask pixel.
/// Output is row-major, ids are emission order, origin Scan.
inline std::vector<TileRect> scan_tiles(const StudyMask& mask, std::uint32_t window, std::uint32_t stride) {
    detail::check_window(mask.height, mask.width, window);
    require(stride >= 1 && stride <= window, ErrorCode::InvalidArgument, "stride must satisfy 1 <= stride <= window");

    detail::IntegralCount counts(mask.height, mask.width);
    counts.rebuild([&](std::size_t r, std::size_t c) { return mask.at(r, c); });

    std::vector<TileRect> tiles;
    const auto rows = detail::scan_positions(mask.height, window, stride);
    const auto cols = detail::scan_positions(mask.width, window, stride);
    for (auto r : rows)
        for (auto c : cols)
            if (counts.sum(r, c, window) > 0)
                tiles.push_back({static_cast<std::uint32_t>(tiles.size()), r, c, TileOrigin::Scan});
    return tiles;
}

/// Greedy completion for mask pixels the scan missed.
///
/// Seed = smallest (row, col) uncovered mask pixel. The window starts centred
/// on it (clamped to bounds) and hill-climbs by single-pixel moves, taking the
/// move with the largest strict gain in newly covered pixels (ties: up, down,
/// left, right). Moves must keep the seed inside the window, so every appended
/// tile covers its seed and the loop terminates.
inline std::vector<TileRect> complete_coverage(const StudyMask& mask, std::uint32_t window,
                                               const std::vector<TileRect>& existing) {
    detail::check_window(mask.height, mask.width, window);
    const std::uint32_t H = mask.height, W = mask.width;
    std::vector<std::uint8_t> covered(static_cast<std::size_t>(H) * W, 0);
    for (const auto& t : existing) {
        require(t.row + window <= H && t.col + window <= W, ErrorCode::InvalidArgument,
                "existing tile " + std::to_string(t.id) + " is out of bounds");
        detail::mark_covered(covered, W, t, window);
    }

    std::vector<TileRect> added;
    detail::IntegralCount gain(H, W);
    const auto max_row = static_cast<std::int64_t>(H - window);
    const auto max_col = static_cast<std::int64_t>(W - window);
    std::size_t cursor = 0;

    while (true) {
        while (cursor < covered.size() && (covered[cursor] || !mask.inside[cursor])) ++cursor;
        if (cursor == covered.size()) break;
        const auto seed_r = static_cast<std::int64_t>(cursor / W);
        const auto seed_c = static_cast<std::int64_t>(cursor % W);

        gain.rebuild([&](std::size_t r, std::size_t c) { return mask.at(r, c) && !covered[r * W + c]; });

        const auto half = static_cast<std::int64_t>(window / 2);
        std::int64_t row = std::clamp<std::int64_t>(seed_r - half, 0, max_row);
        std::int64_t col = std::clamp<std::int64_t>(seed_c - half, 0, max_col);
        std::int64_t best = gain.sum(row, col, window);

        const auto holds_seed = [&](std::int64_t r, std::int64_t c) {
            return r >= 0 && c >= 0 && r <= max_row && c <= max_col && seed_r >= r && seed_r < r + window &&
                   seed_c >= c && seed_c < c + window;
        };
        constexpr std::int64_t moves[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}}; // up, down, left, right
        while (true) {
            std::int64_t next_gain = best;
            int pick = -1;
            for (int m = 0; m < 4; ++m) {
                const auto r = row + moves[m][0], c = col + moves[m][1];
                if (!holds_seed(r, c)) continue;
                const auto g = gain.sum(r, c, window);
                if (g > next_gain) {
                    next_gain = g;
                    pick = m;
                }
            }
            if (pick < 0) break;
            row += moves[pick][0];
            col += moves[pick][1];
            best = next_gain;
        }

        TileRect t{static_cast<std::uint32_t>(existing.size() + added.size()), static_cast<std::uint32_t>(row),
                   static_cast<std::uint32_t>(col), TileOrigin::Completion};
        detail::mark_covered(covered, W, t, window);
        added.push_back(t);
    }
    return added;
}

inline TilePlan plan_tiles(const StudyMask& mask, std::uint32_t window, std::uint32_t stride) {
    TilePlan plan{window, stride, mask.height, mask.width, scan_tiles(mask, window, stride)};
    auto extra = complete_coverage(mask, window, plan.tiles);
    plan.tiles.insert(plan.tiles.end(), extra.begin(), extra.end());
    for (std::size_t i = 0; i < plan.tiles.size(); ++i) plan.tiles[i].id = static_cast<std::uint32_t>(i);
    return plan;
}

/// Fraction of mask pixels inside at least one tile; 1.0 for an empty mask.
inline double coverage_fraction(const TilePlan& plan, const StudyMask& mask) {
    require(plan.height == mask.height && plan.width == mask.width, ErrorCode::DimensionMismatch,
            "plan and mask dimensions differ");
    std::vector<std::uint8_t> covered(static_cast<std::size_t>(mask.height) * mask.width, 0);
    for (const auto& t : plan.tiles) detail::mark_covered(covered, mask.width, t, plan.window);
    std::size_t total = 0, hit = 0;
    for (std::size_t i = 0; i < covered.size(); ++i) {
        total += mask.inside[i];
        hit += mask.inside[i] & covered[i];
    }
    return total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
}

/// Structural checks: stride range, bounds, consecutive ids.
inline void validate_plan(const TilePlan& plan) {
    detail::check_window(plan.height, plan.width, plan.window);
    require(plan.stride >= 1 && plan.stride <= plan.window, ErrorCode::InvalidArgument,
            "stride must satisfy 1 <= stride <= window");
    for (std::size_t i = 0; i < plan.tiles.size(); ++i) {
        const auto& t = plan.tiles[i];
        require(t.id == i, ErrorCode::BadRecord, "tile ids must be consecutive from 0");
        require(t.row + plan.window <= plan.height && t.col + plan.window <= plan.width, ErrorCode::BadRecord,
                "tile " + std::to_string(t.id) + " exceeds raster bounds");
    }
}

// Plan text file: "window=W stride=S height=H width=W", then "id,row,col,Scan|Completion".

inline std::string format_plan(const TilePlan& plan) {
    std::string out = "window=" + std::to_string(plan.window) + " stride=" + std::to_string(plan.stride) +
                      " height=" + std::to_string(plan.height) + " width=" + std::to_string(plan.width) + "\n";
    for (const auto& t : plan.tiles)
        out += std::to_string(t.id) + "," + std::to_string(t.row) + "," + std::to_string(t.col) + "," +
               (t.origin == TileOrigin::Scan ? "Scan" : "Completion") + "\n";
    return out;
}

inline TilePlan parse_plan(std::string_view text) {
    const auto ls = detail::lines(text);
    require(!ls.empty(), ErrorCode::BadHeader, "plan file is empty");
    TilePlan plan;
    const auto fields = detail::split(ls[0], ' ');
    require(fields.size() == 4, ErrorCode::BadHeader, "plan header must have 4 key=value fields");
    const char* keys[4] = {"window=", "stride=", "height=", "width="};
    std::uint32_t* dst[4] = {&plan.window, &plan.stride, &plan.height, &plan.width};
    for (int i = 0; i < 4; ++i) {
        require(fields[i].starts_with(keys[i]), ErrorCode::BadHeader, "plan header field " + std::string(keys[i]) + " missing");
        *dst[i] = detail::parse_number<std::uint32_t>(fields[i].substr(std::string_view(keys[i]).size()),
                                                      ErrorCode::BadHeader, keys[i]);
    }
    for (std::size_t i = 1; i < ls.size(); ++i) {
        const auto parts = detail::split(ls[i], ',');
        require(parts.size() == 4, ErrorCode::BadRecord, "plan line " + std::to_string(i + 1) + " must have 4 fields");
        TileRect t;
        t.id = detail::parse_number<std::uint32_t>(parts[0], ErrorCode::BadRecord, "tile id");
        t.row = detail::parse_number<std::uint32_t>(parts[1], ErrorCode::BadRecord, "tile row");
        t.col = detail::parse_number<std::uint32_t>(parts[2], ErrorCode::BadRecord, "tile col");
        if (parts[3] == "Scan") t.origin = TileOrigin::Scan;
        else if (parts[3] == "Completion") t.origin = TileOrigin::Completion;
        else fail(ErrorCode::BadRecord, "unknown tile origin '" + std::string(parts[3]) + "'");
        plan.tiles.push_back(t);
    }
    validate_plan(plan);
    return plan;
}

inline void write_plan(const TilePlan& plan, const std::filesystem::path& path) {
    detail::write_text(path, format_plan(plan));
}

inline TilePlan read_plan(const std::filesystem::path& path) { return parse_plan(detail::read_text(path)); }

} // namespace rtwin
