// rtwin command-line front end.
//
// Band numbers on the command line are 1-based (Landsat style): --bands 4,3,2
// selects 0-based bands 3,2,1 as red, green, blue.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "rtwin/rtwin.hpp"

namespace fs = std::filesystem;
using namespace rtwin;

namespace {

SynthSpec parse_synth_spec(std::string_view text) {
    SynthSpec spec;
    for (auto line : detail::lines(text)) {
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail(ErrorCode::BadRecord, "expected key=value, got '" + std::string(line) + "'");
        const auto key = detail::trim(line.substr(0, eq));
        const auto val = line.substr(eq + 1);
        auto u32 = [&] { return detail::parse_number<std::uint32_t>(val, ErrorCode::BadRecord, key); };
        auto f64 = [&] { return detail::parse_number<double>(val, ErrorCode::BadRecord, key); };
        if (key == "t_len") spec.t_len = u32();
        else if (key == "bands") spec.bands = u32();
        else if (key == "height") spec.height = u32();
        else if (key == "width") spec.width = u32();
        else if (key == "trend") spec.trend = f64();
        else if (key == "season_amp") spec.season_amp = f64();
        else if (key == "season_period") spec.season_period = f64();
        else if (key == "noise_sd") spec.noise_sd = f64();
        else if (key == "seed") spec.seed = detail::parse_number<std::uint64_t>(val, ErrorCode::BadRecord, key);
        else fail(ErrorCode::BadRecord, "unknown synth key '" + std::string(key) + "'");
    }
    spec.validate();
    return spec;
}

TimeRange parse_range(const std::string& text, std::uint32_t t_len) {
    if (text.empty()) return {0, t_len};
    const auto parts = detail::split(text, ':');
    if (parts.size() != 2) fail(ErrorCode::InvalidArgument, "range must look like a:b, got '" + text + "'");
    TimeRange r{detail::parse_number<std::uint32_t>(parts[0], ErrorCode::InvalidArgument, "range start"),
                detail::parse_number<std::uint32_t>(parts[1], ErrorCode::InvalidArgument, "range end")};
    require(r.begin < r.end && r.end <= t_len, ErrorCode::InvalidArgument,
            "range " + text + " is empty or outside 0:" + std::to_string(t_len));
    return r;
}

std::array<std::uint32_t, 3> parse_bands(const std::string& text) {
    const auto parts = detail::split(text, ',');
    if (parts.size() != 3) fail(ErrorCode::InvalidArgument, "--bands takes three comma-separated band numbers");
    std::array<std::uint32_t, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto b = detail::parse_number<std::uint32_t>(parts[i], ErrorCode::InvalidArgument, "band number");
        if (b == 0) fail(ErrorCode::UnknownBand, "band numbers start at 1");
        out[i] = b - 1;
    }
    return out;
}

fs::path tile_path(const fs::path& dir, std::uint32_t id) { return dir / ("tile_" + std::to_string(id) + ".rts"); }

struct ModelInputs {
    std::string ckpt, rts, plan, stats;
    std::uint32_t target_t = 0;
};

void add_model_inputs(CLI::App* cmd, ModelInputs& in) {
    cmd->add_option("--ckpt", in.ckpt, "Checkpoint written by train")->required();
    cmd->add_option("--rts", in.rts, "Raster time series")->required();
    cmd->add_option("--plan", in.plan, "Tile plan")->required();
    cmd->add_option("--stats", in.stats, "Normalization statistics")->required();
    cmd->add_option("--target-t", in.target_t, "Time index to predict")->required();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Raster time-series tiling, forecasting and scoring"};
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 1;
    app.add_option("--threads", threads, "Worker thread cap")->check(CLI::PositiveNumber);

    std::string spec_path, out, mask_path, rts_path, plan_path, stats_path, range_text, tiles_dir, bands_text = "4,3,2";

    auto* synth = app.add_subcommand("synth", "Write a synthetic series and its inscribed-ellipse mask");
    synth->add_option("--spec", spec_path, "key=value config (t_len, bands, height, width, trend, season_amp, "
                                           "season_period, noise_sd, seed); '#' starts a comment")
        ->required();
    synth->add_option("--out", out, "Output RTS file")->required();
    synth->add_option("--mask", mask_path, "Output mask file")->required();

    std::uint32_t window = 128, stride = 64;
    auto* plan = app.add_subcommand("plan", "Tile a study mask");
    plan->add_option("--mask", mask_path, "Study mask")->required();
    plan->add_option("--window", window, "Window side in pixels")->capture_default_str();
    plan->add_option("--stride", stride, "Scan stride in pixels")->capture_default_str();
    plan->add_option("--out", out, "Output plan file")->required();

    auto* stats = app.add_subcommand("stats", "Fit per-tile, per-band min/max statistics");
    stats->add_option("--rts", rts_path, "Raster time series")->required();
    stats->add_option("--plan", plan_path, "Tile plan")->required();
    stats->add_option("--train-range", range_text, "Half-open time range a:b (default: all steps)");
    stats->add_option("--out", out, "Output stats file")->required();

    std::uint32_t j = 5, d_feat = 128, d_hidden = 128;
    TrainConfig tc;
    std::string optimizer = "adam";
    auto* train_cmd = app.add_subcommand("train", "Train the forecaster; prints one loss line per epoch");
    train_cmd->add_option("--rts", rts_path, "Raster time series")->required();
    train_cmd->add_option("--plan", plan_path, "Tile plan")->required();
    train_cmd->add_option("--stats", stats_path, "Normalization statistics")->required();
    train_cmd->add_option("--j", j, "Input frames per sample")->capture_default_str();
    train_cmd->add_option("--epochs", tc.epochs, "Training epochs")->capture_default_str();
    train_cmd->add_option("--seed", tc.seed, "Seed for initialization and shuffling")->capture_default_str();
    train_cmd->add_option("--batch", tc.batch, "Samples per optimizer step")->capture_default_str();
    train_cmd->add_option("--lr", tc.lr, "Learning rate")->capture_default_str();
    train_cmd->add_option("--optimizer", optimizer, "adam or sgd")
        ->check(CLI::IsMember({"adam", "sgd"}))
        ->capture_default_str();
    train_cmd->add_option("--train-range", range_text, "Half-open time range a:b (default: all steps)");
    train_cmd->add_option("--d-feat", d_feat, "Encoder feature width")->capture_default_str();
    train_cmd->add_option("--d-hidden", d_hidden, "LSTM hidden width")->capture_default_str();
    train_cmd->add_option("--out", out, "Output checkpoint")->required();

    ModelInputs mi;
    auto* predict = app.add_subcommand("predict", "Write one predicted RTS per tile (T=1, all bands)");
    add_model_inputs(predict, mi);
    predict->add_option("--out-dir", tiles_dir, "Directory for tile_<id>.rts files")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against the observed frame");
    add_model_inputs(evaluate, mi);
    evaluate->add_option("--out", out, "Output report file")->required();

    bool feathered = false;
    auto* stitch_cmd = app.add_subcommand("stitch", "Merge per-tile predictions into one raster");
    stitch_cmd->add_option("--plan", plan_path, "Tile plan")->required();
    stitch_cmd->add_option("--tiles", tiles_dir, "Directory of tile_<id>.rts files")->required();
    stitch_cmd->add_flag("--feathered", feathered, "Weight pixels by distance to the window edge");
    stitch_cmd->add_option("--out", out, "Output RTS file (T=1)")->required();

    std::uint32_t t_index = 0;
    auto* composite = app.add_subcommand("composite", "Export three bands as a stretched PPM image");
    composite->add_option("--rts", rts_path, "Raster time series")->required();
    composite->add_option("--t", t_index, "Time index")->required();
    composite->add_option("--bands", bands_text, "1-based red,green,blue band numbers")->capture_default_str();
    composite->add_option("--out", out, "Output PPM file")->required();

    for (auto* sub : app.get_subcommands([](CLI::App*) { return true; }))
        sub->footer("Global option (before or after the command): --threads N caps worker threads, default 1.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*synth) {
            const auto [series, mask] = synth_series(parse_synth_spec(detail::read_text(spec_path)));
            write_rts(series, out);
            write_mask(mask, mask_path);
        } else if (*plan) {
            const auto p = plan_tiles(read_mask(mask_path), window, stride);
            write_plan(p, out);
            std::cout << "tiles " << p.size() << "\n";
        } else if (*stats) {
            const auto series = read_rts(rts_path);
            write_stats(fit_stats(series, read_plan(plan_path), parse_range(range_text, series.t_len)), out);
        } else if (*train_cmd) {
            const auto series = read_rts(rts_path);
            const auto p = read_plan(plan_path);
            const auto st = read_stats(stats_path);
            const auto ds = make_dataset(series, p, st, j, parse_range(range_text, series.t_len));
            tc.optimizer = optimizer == "sgd" ? ag::OptimizerKind::Sgd : ag::OptimizerKind::Adam;
            tc.threads = threads;
            const auto cfg = ModelConfig::for_plan(p.window, p.size(), j, d_feat, d_hidden);
            const auto res = train(init_params(cfg, tc.seed), ds, tc, [](std::uint32_t epoch, double loss) {
                std::cout << "epoch " << epoch << " loss " << detail::format_double(loss) << std::endl;
            });
            save_checkpoint(res.params, tc, out);
        } else if (*predict || *evaluate) {
            const auto ck = load_checkpoint(mi.ckpt);
            const auto series = read_rts(mi.rts);
            const auto p = read_plan(mi.plan);
            const auto st = read_stats(mi.stats);
            if (*evaluate) {
                const auto report = evaluate_year(ck.params, series, p, st, mi.target_t, threads);
                write_report(report, out);
                const auto mean = report.overall_mean();
                std::cout << "mean_nrmse " << (mean ? detail::format_double(*mean) : "null") << "\n";
            } else {
                require(ck.params.config.tiles == p.size() && ck.params.config.window == p.window,
                        ErrorCode::DimensionMismatch, "checkpoint does not match the plan");
                require(mi.target_t >= ck.params.config.j && mi.target_t < series.t_len, ErrorCode::IndexOutOfRange,
                        "target_t must lie in [j, t_len)");
                fs::create_directories(tiles_dir);
                const auto predictor = model_predictor(ck.params);
                for (const auto& tile : p.tiles) {
                    RasterSeries out_tile = RasterSeries::filled(1, series.bands, p.window, p.window, 0.0f);
                    for (std::uint32_t b = 0; b < series.bands; ++b) {
                        const auto tp = predict_tile(predictor, series, p, st, ck.params.config.j, mi.target_t, tile.id, b);
                        std::copy(tp.predicted.begin(), tp.predicted.end(),
                                  out_tile.samples.begin() + static_cast<std::ptrdiff_t>(out_tile.index(0, b, 0, 0)));
                    }
                    write_rts(out_tile, tile_path(tiles_dir, tile.id));
                }
            }
        } else if (*stitch_cmd) {
            const auto p = read_plan(plan_path);
            std::vector<RasterSeries> tiles;
            for (const auto& tile : p.tiles) {
                const auto path = tile_path(tiles_dir, tile.id);
                if (!fs::exists(path)) fail(ErrorCode::MissingTile, "missing " + path.string());
                tiles.push_back(read_rts(path));
                const auto& t = tiles.back();
                require(t.t_len == 1 && t.height == p.window && t.width == p.window && t.bands == tiles.front().bands,
                        ErrorCode::DimensionMismatch, path.string() + " is not a 1-step window-sized tile");
            }
            const std::uint32_t bands = tiles.empty() ? 1 : tiles.front().bands;
            auto merged = RasterSeries::filled(1, bands, p.height, p.width, 0.0f);
            for (std::uint32_t b = 0; b < bands; ++b) {
                std::vector<Frame> frames;
                for (const auto& t : tiles) {
                    const float* first = &t.samples[t.index(0, b, 0, 0)];
                    frames.emplace_back(first, first + t.frame_size());
                }
                const auto res =
                    stitch(p, frames, p.height, p.width, feathered ? StitchWeighting::Feathered : StitchWeighting::Uniform);
                std::copy(res.values.begin(), res.values.end(),
                          merged.samples.begin() + static_cast<std::ptrdiff_t>(merged.index(0, b, 0, 0)));
            }
            write_rts(merged, out);
        } else if (*composite) {
            write_composite(read_rts(rts_path), t_index, parse_bands(bands_text), out);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: IoFailure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
