#include <gtest/gtest.h>

#include "rtwin/training.hpp"
#include "test_support.hpp"

using namespace rtwin;

namespace {

struct Fixture {
    RasterSeries series;
    TilePlan plan;
    NormStats stats;
};

Fixture small_fixture(std::uint32_t t_len = 8, std::uint64_t seed = 1) {
    SynthSpec spec{t_len, 2, 48, 48, 0.5, 1.0, 4.0, 0.2, seed};
    auto [series, mask] = synth_series(spec);
    auto plan = plan_tiles(mask, 32, 16);
    auto stats = fit_stats(series, plan);
    return {std::move(series), std::move(plan), std::move(stats)};
}

ModelConfig small_config(const TilePlan& plan, std::uint32_t j) { return ModelConfig::for_plan(32, plan.size(), j, 8, 8); }

bool same_values(const ModelParams& a, const ModelParams& b) {
    const auto ta = a.tensors(), tb = b.tensors();
    for (std::size_t i = 0; i < ta.size(); ++i)
        if (!std::equal(ta[i].values().begin(), ta[i].values().end(), tb[i].values().begin())) return false;
    return true;
}

} // namespace

TEST(Dataset, CountMatchesEnumeration) {
    const auto fx = small_fixture(10);
    for (std::uint32_t j : {1u, 3u, 5u})
        for (TimeRange r : {TimeRange{0, 10}, TimeRange{2, 9}, TimeRange{4, 10}}) {
            if (r.size() <= j) continue;
            const auto ds = make_dataset(fx.series, fx.plan, fx.stats, j, r);
            std::size_t enumerated = 0;
            for (std::size_t tile = 0; tile < fx.plan.size(); ++tile)
                for (std::uint32_t b = 0; b < 2; ++b)
                    for (auto t = r.begin; t + j < r.end; ++t) ++enumerated;
            EXPECT_EQ(ds.size(), enumerated);
            EXPECT_EQ(ds.size(), dataset_size(fx.plan.size(), 2, r.size(), j));
            for (const auto& s : ds) {
                EXPECT_EQ(s.inputs.size(), j);
                EXPECT_GE(s.target_t, r.begin + j);
                EXPECT_LT(s.target_t, r.end);
            }
        }
    EXPECT_EQ(dataset_size(255, 8, 20, 5), 30600u);
}

TEST(Dataset, SamplesAlignWithNormalizedFrames) {
    const auto fx = small_fixture(8);
    const auto ds = make_dataset(fx.series, fx.plan, fx.stats, 2, {1, 8});
    const auto& s = ds[3];
    EXPECT_EQ(*s.target, apply(fx.series, fx.plan, fx.stats, s.tile_id, s.band, s.target_t).values);
    EXPECT_EQ(*s.inputs[0], apply(fx.series, fx.plan, fx.stats, s.tile_id, s.band, s.target_t - 2).values);
    EXPECT_EQ(s.cond, condition_code(s.tile_id, s.band, fx.plan.size()));
}

TEST(Dataset, RangeTooShort) {
    const auto fx = small_fixture(8);
    try {
        make_dataset(fx.series, fx.plan, fx.stats, 5, {0, 5});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RangeTooShort);
    }
}

TEST(Train, ZeroLearningRateLeavesParameters) {
    const auto fx = small_fixture();
    const auto ds = make_dataset(fx.series, fx.plan, fx.stats, 2, {0, 8});
    const auto init = init_params(small_config(fx.plan, 2), 3);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.lr = 0.0;
    const auto res = train(init, ds, cfg);
    EXPECT_TRUE(same_values(init, res.params));
    EXPECT_EQ(res.loss_history.size(), 2u);
    EXPECT_NEAR(res.loss_history[0], res.loss_history[1], 1e-12); // same samples, shuffled summation order
}

TEST(Train, DeterministicAcrossRunsAndThreads) {
    const auto fx = small_fixture();
    const auto ds = make_dataset(fx.series, fx.plan, fx.stats, 2, {0, 8});
    const auto init = init_params(small_config(fx.plan, 2), 4);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch = 4;
    cfg.seed = 42;
    const auto a = train(init, ds, cfg);
    const auto b = train(init, ds, cfg);
    cfg.threads = 4;
    const auto c = train(init, ds, cfg);
    EXPECT_TRUE(same_values(a.params, b.params));
    EXPECT_TRUE(same_values(a.params, c.params));
    EXPECT_EQ(a.loss_history, c.loss_history);
    EXPECT_FALSE(same_values(init, a.params));
}

TEST(Train, UpdatesEveryGroup) {
    const auto fx = small_fixture();
    const auto ds = make_dataset(fx.series, fx.plan, fx.stats, 2, {0, 8});
    const auto init = init_params(small_config(fx.plan, 2), 5);
    TrainConfig cfg;
    cfg.epochs = 1;
    const auto res = train(init, ds, cfg);
    const auto before = init.named(), after = res.params.named();
    for (auto group : {ParamGroup::Encoder, ParamGroup::Temporal, ParamGroup::Generator}) {
        double moved = 0.0;
        for (std::size_t i = 0; i < before.size(); ++i) {
            if (before[i].group != group) continue;
            for (std::size_t e = 0; e < before[i].tensor.numel(); ++e)
                moved += std::abs(before[i].tensor.values()[e] - after[i].tensor.values()[e]);
        }
        EXPECT_GT(moved, 0.0) << "group " << static_cast<int>(group);
    }
}

TEST(Train, LossDecreasesForMostSeeds) {
    const auto fx = small_fixture(8, 2);
    const auto ds = make_dataset(fx.series, fx.plan, fx.stats, 2, {0, 8});
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        TrainConfig cfg;
        cfg.epochs = 5;
        cfg.batch = 4;
        cfg.lr = 3e-3;
        cfg.seed = seed;
        const auto res = train(init_params(small_config(fx.plan, 2), seed), ds, cfg);
        improved += res.loss_history.back() < res.loss_history.front();
    }
    EXPECT_GE(improved, 19);
}

TEST(Train, SingleSampleFullBatchIsMonotone) {
    const auto fx = small_fixture();
    auto ds = make_dataset(fx.series, fx.plan, fx.stats, 2, {0, 8});
    ds.resize(1);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch = 1;
    cfg.lr = 1e-3;
    const auto res = train(init_params(small_config(fx.plan, 2), 6), ds, cfg);
    for (std::size_t e = 1; e < res.loss_history.size(); ++e)
        EXPECT_LE(res.loss_history[e], res.loss_history[e - 1] + 1e-6) << "epoch " << e;
}

TEST(Train, EmptyDatasetAndNonFiniteLoss) {
    const auto fx = small_fixture();
    const auto init = init_params(small_config(fx.plan, 2), 7);
    try {
        train(init, {}, TrainConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
    }
    auto ds = make_dataset(fx.series, fx.plan, fx.stats, 2, {0, 8});
    auto bad = std::make_shared<Frame>(*ds[0].target);
    (*bad)[0] = std::numeric_limits<double>::quiet_NaN();
    ds[0].target = bad;
    try {
        train(init, ds, TrainConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
    }
}

TEST(Checkpoint, RoundTripIsBitExact) {
    const auto fx = small_fixture();
    const auto params = init_params(small_config(fx.plan, 3), 8);
    TrainConfig tc;
    tc.epochs = 7;
    tc.lr = 1.0 / 3.0;
    tc.seed = 123456789012345ull;
    tc.optimizer = ag::OptimizerKind::Sgd;
    const auto bytes = encode_checkpoint(params, tc);
    const auto ck = decode_checkpoint(bytes);
    EXPECT_EQ(ck.params.config, params.config);
    EXPECT_EQ(ck.train, tc);
    EXPECT_TRUE(same_values(ck.params, params));
    EXPECT_EQ(encode_checkpoint(ck.params, ck.train), bytes);

    rtwin::testkit::TempDir dir("ckpt");
    save_checkpoint(params, tc, dir / "m.ckpt");
    EXPECT_TRUE(same_values(load_checkpoint(dir / "m.ckpt").params, params));
}

TEST(Checkpoint, Corruption) {
    const auto params = init_params(ModelConfig::for_plan(32, 2, 2, 4, 4), 9);
    auto bytes = encode_checkpoint(params, TrainConfig{});
    auto code_of = [](std::span<const char> b) {
        try {
            decode_checkpoint(b);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code_of(std::span<const char>(bytes).first(bytes.size() - 3)), ErrorCode::TruncatedPayload);
    auto versioned = bytes;
    versioned[4] = 2;
    EXPECT_EQ(code_of(versioned), ErrorCode::VersionMismatch);
    auto magic = bytes;
    magic[0] = 'X';
    EXPECT_EQ(code_of(magic), ErrorCode::BadMagic);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_EQ(code_of(trailing), ErrorCode::TrailingBytes);
}

TEST(Checkpoint, ConditionWidthFollowsPlan) {
    const auto params = init_params(ModelConfig::for_plan(32, 2, 2, 4, 4), 10);
    const auto ck = decode_checkpoint(encode_checkpoint(params, TrainConfig{}));
    SplitMix64 rng(1);
    std::vector<Frame> frames(2, Frame(32 * 32, 0.5));
    EXPECT_NO_THROW(predict_frame(ck.params, frames, condition_code(1, 0, 2)));
    EXPECT_THROW(predict_frame(ck.params, frames, condition_code(1, 0, 4)), Error);
}
