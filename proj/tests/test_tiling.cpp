#include <gtest/gtest.h>

#include "rtwin/tiling.hpp"
#include "test_support.hpp"

using namespace rtwin;

namespace {

StudyMask random_mask(SplitMix64& rng, std::uint32_t h, std::uint32_t w, double density) {
    auto m = StudyMask::filled(h, w, false);
    for (auto& v : m.inside) v = rng.uniform() < density ? 1 : 0;
    return m;
}

// Brute force: count, per pixel, how many tiles contain it.
std::vector<int> covering_counts(const StudyMask& m, const std::vector<TileRect>& tiles, std::uint32_t window) {
    std::vector<int> cnt(m.inside.size(), 0);
    for (std::uint32_t r = 0; r < m.height; ++r)
        for (std::uint32_t c = 0; c < m.width; ++c)
            for (const auto& t : tiles)
                if (r >= t.row && r < t.row + window && c >= t.col && c < t.col + window) ++cnt[r * m.width + c];
    return cnt;
}

std::size_t mask_pixels_in(const StudyMask& m, const TileRect& t, std::uint32_t window) {
    std::size_t n = 0;
    for (std::uint32_t r = t.row; r < t.row + window; ++r)
        for (std::uint32_t c = t.col; c < t.col + window; ++c) n += m.at(r, c);
    return n;
}

} // namespace

TEST(ScanTiles, ExactGridFit) {
    const auto tiles = scan_tiles(StudyMask::filled(256, 256, true), 128, 128);
    ASSERT_EQ(tiles.size(), 4u);
    const std::pair<std::uint32_t, std::uint32_t> want[] = {{0, 0}, {0, 128}, {128, 0}, {128, 128}};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(tiles[i].id, i);
        EXPECT_EQ(tiles[i].row, want[i].first);
        EXPECT_EQ(tiles[i].col, want[i].second);
        EXPECT_EQ(tiles[i].origin, TileOrigin::Scan);
    }
}

TEST(ScanTiles, HalfStrideGivesNine) {
    const auto tiles = scan_tiles(StudyMask::filled(256, 256, true), 128, 64);
    ASSERT_EQ(tiles.size(), 9u);
    EXPECT_EQ(tiles[4].row, 64u);
    EXPECT_EQ(tiles[8].row, 128u);
    EXPECT_EQ(tiles[8].col, 128u);
}

TEST(ScanTiles, LastCandidateClampsToEdge) {
    const auto tiles = scan_tiles(StudyMask::filled(100, 100, true), 32, 32);
    ASSERT_EQ(tiles.size(), 16u); // 0, 32, 64, 68
    EXPECT_EQ(tiles[3].col, 68u);
}

TEST(ScanTiles, EmptyMaskGivesNothing) {
    EXPECT_TRUE(scan_tiles(StudyMask::filled(64, 64, false), 16, 8).empty());
    EXPECT_TRUE(plan_tiles(StudyMask::filled(64, 64, false), 16, 8).tiles.empty());
}

TEST(ScanTiles, RejectsWindowTooLargeAndBadStride) {
    EXPECT_THROW(scan_tiles(StudyMask::filled(10, 20, true), 11, 4), Error);
    try {
        scan_tiles(StudyMask::filled(10, 20, true), 11, 4);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::WindowTooLarge);
    }
    EXPECT_THROW(scan_tiles(StudyMask::filled(10, 20, true), 8, 9), Error);
    EXPECT_THROW(scan_tiles(StudyMask::filled(10, 20, true), 8, 0), Error);
}

TEST(CompleteCoverage, NothingToDoWhenCovered) {
    const auto mask = StudyMask::filled(32, 32, true);
    const auto scan = scan_tiles(mask, 16, 16);
    EXPECT_TRUE(complete_coverage(mask, 16, scan).empty());
}

TEST(CompleteCoverage, CornerPixelClampsToOrigin) {
    auto mask = StudyMask::filled(40, 40, false);
    mask.set(0, 0, true);
    const auto added = complete_coverage(mask, 16, {});
    ASSERT_EQ(added.size(), 1u);
    EXPECT_EQ(added[0].row, 0u);
    EXPECT_EQ(added[0].col, 0u);
    EXPECT_EQ(added[0].origin, TileOrigin::Completion);
}

TEST(CompleteCoverage, HillClimbGathersNeighbouringPixels) {
    // Seed at (10,10); the initial window (2..17) clips a 4x4 block at 16..19,
    // and climbing down/right pulls the whole block in.
    auto mask = StudyMask::filled(64, 64, false);
    mask.set(10, 10, true);
    for (std::uint32_t r = 16; r < 20; ++r)
        for (std::uint32_t c = 16; c < 20; ++c) mask.set(r, c, true);
    const auto added = complete_coverage(mask, 16, {});
    ASSERT_EQ(added.size(), 1u);
    EXPECT_EQ(mask_pixels_in(mask, added[0], 16), 17u);
}

TEST(CompleteCoverage, GappyScanOnRandomMasksIsRepaired) {
    SplitMix64 rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const auto mask = random_mask(rng, 64, 64, rng.uniform(0.02, 0.6));
        // stride > window is illegal for plan_tiles; assemble a deliberately gappy scan by hand.
        std::vector<TileRect> scan;
        for (std::uint32_t r = 0; r + 16 <= 64; r += 24)
            for (std::uint32_t c = 0; c + 16 <= 64; c += 24)
                if (mask_pixels_in(mask, {0, r, c}, 16) > 0)
                    scan.push_back({static_cast<std::uint32_t>(scan.size()), r, c, TileOrigin::Scan});
        const auto added = complete_coverage(mask, 16, scan);
        auto all = scan;
        all.insert(all.end(), added.begin(), added.end());
        const auto cnt = covering_counts(mask, all, 16);
        for (std::size_t i = 0; i < cnt.size(); ++i)
            if (mask.inside[i]) {
                ASSERT_GT(cnt[i], 0) << "trial " << trial << " pixel " << i;
            }
    }
}

TEST(CompleteCoverage, EachCompletionTileAddsNewPixels) {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const auto mask = random_mask(rng, 48, 48, 0.1);
        const auto added = complete_coverage(mask, 8, {});
        std::vector<TileRect> sofar;
        for (const auto& t : added) {
            const auto before = covering_counts(mask, sofar, 8);
            sofar.push_back(t);
            const auto after = covering_counts(mask, sofar, 8);
            std::size_t fresh = 0;
            for (std::size_t i = 0; i < after.size(); ++i) fresh += mask.inside[i] && before[i] == 0 && after[i] > 0;
            EXPECT_GE(fresh, 1u);
        }
    }
}

TEST(PlanTiles, AllTrueExactFit) {
    const auto plan = plan_tiles(StudyMask::filled(256, 256, true), 128, 128);
    EXPECT_EQ(plan.size(), 4u);
    for (const auto& t : plan.tiles) EXPECT_EQ(t.origin, TileOrigin::Scan);
}

TEST(PlanTiles, PaperDatasetImpliesTileCount) {
    // 42,840 images over 21 years and 8 bands.
    EXPECT_EQ(42840 % (21 * 8), 0);
    EXPECT_EQ(42840 / (21 * 8), 255);
}

TEST(PlanTiles, RandomMasksAreFullyCoveredAndDeterministic) {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto mask = random_mask(rng, 40 + rng.below(30), 40 + rng.below(30), rng.uniform(0.01, 0.9));
        const std::uint32_t window = 8u << rng.below(3);
        const std::uint32_t stride = rng.below(2) ? window : window / 2;
        const auto plan = plan_tiles(mask, window, stride);
        EXPECT_EQ(coverage_fraction(plan, mask), 1.0);
        for (std::size_t i = 0; i < plan.size(); ++i) {
            EXPECT_EQ(plan.tiles[i].id, i);
            EXPECT_GE(mask_pixels_in(mask, plan.tiles[i], window), 1u);
        }
        EXPECT_EQ(plan_tiles(mask, window, stride), plan);
    }
}

TEST(CoverageFraction, Conventions) {
    auto mask = StudyMask::filled(8, 8, false);
    TilePlan empty{4, 4, 8, 8, {}};
    EXPECT_EQ(coverage_fraction(empty, mask), 1.0);
    mask.set(3, 3, true);
    EXPECT_EQ(coverage_fraction(empty, mask), 0.0);
}

TEST(CoverageFraction, HalfCovered) {
    // True pixels: rows 0..3, cols 0..7 (32 pixels); one 4x4 tile at (0,0) covers 16.
    auto mask = StudyMask::filled(8, 8, false);
    for (std::uint32_t r = 0; r < 4; ++r)
        for (std::uint32_t c = 0; c < 8; ++c) mask.set(r, c, true);
    TilePlan plan{4, 4, 8, 8, {{0, 0, 0, TileOrigin::Scan}}};
    EXPECT_DOUBLE_EQ(coverage_fraction(plan, mask), 0.5);
    TilePlan wrong{4, 4, 8, 9, {}};
    EXPECT_THROW(coverage_fraction(wrong, mask), Error);
}

TEST(PlanFile, FormatAndRoundTrip) {
    auto mask = StudyMask::filled(30, 30, false);
    mask.set(29, 29, true);
    mask.set(0, 0, true);
    const auto plan = plan_tiles(mask, 8, 8);
    const auto text = format_plan(plan);
    EXPECT_TRUE(text.starts_with("window=8 stride=8 height=30 width=30\n"));
    EXPECT_EQ(parse_plan(text), plan);

    testkit::TempDir dir("plan");
    write_plan(plan, dir / "p.txt");
    EXPECT_EQ(read_plan(dir / "p.txt"), plan);
}

TEST(PlanFile, RejectsMalformed) {
    EXPECT_THROW(parse_plan(""), Error);
    EXPECT_THROW(parse_plan("window=8 stride=8 height=30\n"), Error);
    EXPECT_THROW(parse_plan("window=8 stride=8 height=30 width=30\n0,0,0,Diagonal\n"), Error);
    EXPECT_THROW(parse_plan("window=8 stride=8 height=30 width=30\n0,25,0,Scan\n"), Error);
    EXPECT_THROW(parse_plan("window=8 stride=8 height=30 width=30\n1,0,0,Scan\n"), Error);
}
