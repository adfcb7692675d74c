// Synthetic forecast: train on the first 19 steps, score step 19 against a
// persistence forecast.

#include <cstdio>

#include "rtwin/rtwin.hpp"

using namespace rtwin;

int main(int argc, char** argv) {
    const std::uint32_t epochs = argc > 1 ? static_cast<std::uint32_t>(std::atoi(argv[1])) : 20;

    SynthSpec spec;
    spec.trend = 0.5;
    spec.season_amp = 1.0;
    spec.noise_sd = 0.05;
    spec.seed = 7;
    const auto [series, mask] = synth_series(spec);
    const auto plan = plan_tiles(mask, 32, 16);
    const TimeRange fit{0, 19};
    const auto stats = fit_stats(series, plan, fit);
    std::printf("tiles=%zu coverage=%.3f\n", plan.size(), coverage_fraction(plan, mask));

    const std::uint32_t j = 4;
    const auto data = make_dataset(series, plan, stats, j, fit);
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch = 8;
    tc.lr = 3e-3;
    tc.seed = 42;
    const auto cfg = ModelConfig::for_plan(32, plan.size(), j, 32, 32);
    const auto res = train(init_params(cfg, tc.seed), data, tc, [](std::uint32_t e, double loss) {
        std::printf("epoch %u loss %.6f\n", e, loss);
    });

    const auto model = evaluate_year(res.params, series, plan, stats, 19);
    const auto naive = evaluate_with(persistence_predictor(), series, plan, stats, j, 19);
    std::printf("model mean nrmse %.4f\npersistence mean nrmse %.4f\n", model.overall_mean().value_or(-1),
                naive.overall_mean().value_or(-1));

    std::vector<Frame> tiles;
    for (const auto& t : plan.tiles)
        tiles.push_back(predict_tile(model_predictor(res.params), series, plan, stats, j, 19, t.id, 0).predicted);
    const auto merged = stitch(plan, tiles, series.height, series.width);
    std::size_t covered = 0;
    for (auto w : merged.weight) covered += w > 0;
    std::printf("stitched band 0: %zu of %zu pixels covered\n", covered, merged.weight.size());
    return 0;
}
