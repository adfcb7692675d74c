#include <gtest/gtest.h>

#include "rtwin/normalize.hpp"
#include "test_support.hpp"

using namespace rtwin;

namespace {

TilePlan single_tile_plan(std::uint32_t size) { return {size, size, size, size, {{0, 0, 0, TileOrigin::Scan}}}; }

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST(FitStats, ConstantTile) {
    const auto s = RasterSeries::filled(3, 1, 4, 4, 5.0f);
    const auto st = fit_stats(s, single_tile_plan(4));
    const auto& b = st.at(0, 0);
    EXPECT_EQ(b.min, 5.0);
    EXPECT_EQ(b.max, 5.0);
    EXPECT_EQ(b.mean, 5.0);
    EXPECT_EQ(b.variance, 0.0);
}

TEST(FitStats, TwoValuesPopulationVariance) {
    auto s = RasterSeries::filled(2, 1, 2, 2, 0.0f);
    for (std::size_t i = 4; i < 8; ++i) s.samples[i] = 10.0f; // t=1 all tens
    const auto st = fit_stats(s, single_tile_plan(2));
    const auto& b = st.at(0, 0);
    EXPECT_EQ(b.min, 0.0);
    EXPECT_EQ(b.max, 10.0);
    EXPECT_EQ(b.mean, 5.0);
    EXPECT_EQ(b.variance, 25.0);
}

TEST(FitStats, AllNodataTileFails) {
    const auto s = RasterSeries::filled(2, 1, 2, 2, -1.0f, -1.0f);
    EXPECT_EQ(code_of([&] { fit_stats(s, single_tile_plan(2)); }), ErrorCode::AllNodataTile);
}

TEST(FitStats, RangeRestrictsTimeSteps) {
    auto s = RasterSeries::filled(3, 1, 2, 2, 1.0f);
    for (std::size_t i = 8; i < 12; ++i) s.samples[i] = 100.0f;
    const auto st = fit_stats(s, single_tile_plan(2), TimeRange{0, 2});
    EXPECT_EQ(st.at(0, 0).max, 1.0);
    EXPECT_EQ(fit_stats(s, single_tile_plan(2)).at(0, 0).max, 100.0);
}

TEST(FitStats, MatchesOnePassOracle) {
    SplitMix64 rng(17);
    SynthSpec spec{6, 3, 24, 24, 0.3, 1.0, 4.0, 0.5, 8};
    auto [series, mask] = synth_series(spec);
    for (std::size_t i = 0; i < series.samples.size(); i += 13) series.samples[i] = series.nodata;
    const auto plan = plan_tiles(mask, 8, 4);
    const auto st = fit_stats(series, plan);
    for (const auto& tile : plan.tiles)
        for (std::uint32_t b = 0; b < series.bands; ++b) {
            // Welford
            double mean = 0.0, m2 = 0.0, lo = 1e300, hi = -1e300;
            std::size_t n = 0;
            for (std::uint32_t t = 0; t < series.t_len; ++t)
                for (std::uint32_t r = 0; r < 8; ++r)
                    for (std::uint32_t c = 0; c < 8; ++c) {
                        const float v = series.at(t, b, tile.row + r, tile.col + c);
                        if (std::isnan(v)) continue;
                        ++n;
                        const double d = v - mean;
                        mean += d / static_cast<double>(n);
                        m2 += d * (v - mean);
                        lo = std::min<double>(lo, v);
                        hi = std::max<double>(hi, v);
                    }
            const auto& got = st.at(tile.id, b);
            EXPECT_EQ(got.min, lo);
            EXPECT_EQ(got.max, hi);
            EXPECT_NEAR(got.mean, mean, 1e-9 * std::abs(mean));
            EXPECT_NEAR(got.variance, m2 / static_cast<double>(n), 1e-9 * m2 / static_cast<double>(n));
            EXPECT_LE(got.min, got.mean);
            EXPECT_LE(got.mean, got.max);
        }
}

TEST(Apply, EndpointsAndLinearMap) {
    auto s = RasterSeries::filled(1, 1, 2, 2, 0.0f);
    s.samples = {0.0f, 10.0f, 2.5f, 5.0f};
    const auto plan = single_tile_plan(2);
    const auto st = fit_stats(s, plan);
    const auto w = apply(s, plan, st, 0, 0, 0);
    EXPECT_FALSE(w.degenerate_range);
    EXPECT_EQ(w.values[0], 0.0);
    EXPECT_EQ(w.values[1], 1.0);
    EXPECT_EQ(w.values[2], 0.25);
    EXPECT_EQ(w.values[3], 0.5);
}

TEST(Apply, NodataMapsToZeroAndOutOfRangeClamps) {
    auto s = RasterSeries::filled(2, 1, 1, 2, 0.0f);
    s.samples = {0.0f, 10.0f, std::numeric_limits<float>::quiet_NaN(), 20.0f};
    TilePlan wide{1, 1, 1, 2, {{0, 0, 0, TileOrigin::Scan}, {1, 0, 1, TileOrigin::Scan}}};
    NormStats st{2, 1, {{0.0, 10.0, 5.0, 25.0}, {0.0, 10.0, 5.0, 25.0}}};
    EXPECT_EQ(apply(s, wide, st, 0, 0, 1).values[0], 0.0);
    EXPECT_EQ(apply(s, wide, st, 1, 0, 1).values[0], 1.0);
}

TEST(Apply, DegenerateFlagAndInvert) {
    const auto s = RasterSeries::filled(2, 1, 2, 2, 7.0f);
    const auto plan = single_tile_plan(2);
    const auto st = fit_stats(s, plan);
    const auto w = apply(s, plan, st, 0, 0, 1);
    EXPECT_TRUE(w.degenerate_range);
    for (double v : w.values) EXPECT_EQ(v, 0.0);
    const std::vector<double> any{0.3, 0.9, 0.0, 1.0};
    for (double v : invert(any, st, 0, 0)) EXPECT_EQ(v, 7.0);
}

TEST(Apply, UnknownTileOrBand) {
    const auto s = RasterSeries::filled(1, 1, 2, 2, 1.0f);
    const auto plan = single_tile_plan(2);
    const auto st = fit_stats(s, plan);
    EXPECT_EQ(code_of([&] { apply(s, plan, st, 1, 0, 0); }), ErrorCode::UnknownTile);
    EXPECT_EQ(code_of([&] { apply(s, plan, st, 0, 1, 0); }), ErrorCode::UnknownBand);
    const std::vector<double> w(4, 0.0);
    EXPECT_EQ(code_of([&] { invert(w, st, 3, 0); }), ErrorCode::UnknownTile);
    EXPECT_EQ(code_of([&] { invert(w, st, 0, 2); }), ErrorCode::UnknownBand);
}

TEST(Invert, Endpoints) {
    NormStats st{1, 1, {{-2.0, 6.0, 1.0, 3.0}}};
    const std::vector<double> w{0.0, 1.0};
    const auto out = invert(w, st, 0, 0);
    EXPECT_EQ(out[0], -2.0);
    EXPECT_EQ(out[1], 6.0);
}

TEST(Invert, RoundTripProperty) {
    SplitMix64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        SynthSpec spec{4, 2, 16, 16, rng.uniform(-1, 1), rng.uniform(0, 2), 4.0, rng.uniform(0, 1), rng.next()};
        const auto [series, mask] = synth_series(spec);
        const auto plan = plan_tiles(mask, 8, 8);
        const auto st = fit_stats(series, plan);
        for (const auto& tile : plan.tiles)
            for (std::uint32_t b = 0; b < 2; ++b)
                for (std::uint32_t t = 0; t < 4; ++t) {
                    const auto norm = apply(series, plan, st, tile.id, b, t);
                    ASSERT_FALSE(norm.degenerate_range);
                    const auto back = invert(norm.values, st, tile.id, b);
                    const auto raw = crop_window(series, plan, tile.id, b, t);
                    for (std::size_t i = 0; i < raw.size(); ++i) {
                        EXPECT_GE(norm.values[i], 0.0);
                        EXPECT_LE(norm.values[i], 1.0);
                        EXPECT_NEAR(back[i], raw[i], 1e-6 * std::max(1.0, std::abs(double(raw[i]))));
                    }
                }
    }
}

TEST(StatsFile, RoundTripIsExact) {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        NormStats st{1 + static_cast<std::uint32_t>(rng.below(5)), 1 + static_cast<std::uint32_t>(rng.below(4)), {}};
        for (std::size_t i = 0; i < std::size_t{st.tiles} * st.bands; ++i) {
            const double a = rng.uniform(-1e6, 1e6), b = rng.uniform(-1e6, 1e6);
            st.entries.push_back({std::min(a, b), std::max(a, b), (a + b) / 3.0, rng.uniform() * 1e-7});
        }
        EXPECT_EQ(parse_stats(format_stats(st)), st);
    }
    testkit::TempDir dir("stats");
    NormStats st{1, 1, {{0.1, 0.7, 0.3, 1.0 / 3.0}}};
    write_stats(st, dir / "s.txt");
    EXPECT_EQ(read_stats(dir / "s.txt"), st);
}

TEST(StatsFile, RejectsIncomplete) {
    EXPECT_THROW(parse_stats("0,0,1,2,1.5,0.25\n1,1,1,2,1.5,0.25\n"), Error);
    EXPECT_THROW(parse_stats("0,0,1,2,1.5\n"), Error);
    EXPECT_THROW(parse_stats("0,0,1,2,1.5,0.25\n0,0,1,2,1.5,0.25\n"), Error);
}
