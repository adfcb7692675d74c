#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtwin/binary.hpp"
#include "rtwin/error.hpp"
#include "rtwin/model.hpp"
#include "rtwin/normalize.hpp"
#include "rtwin/parallel.hpp"
#include "rtwin/raster_io.hpp"
#include "rtwin/text.hpp"
#include "rtwin/tiling.hpp"

namespace rtwin {

/// sqrt(sum_i (y_i - yhat_i)^2 / (n * var(y))) with the population variance
/// of the truth. NaN truth pixels are nodata and excluded from the sums and n.
inline double nrmse(std::span<const double> truth, std::span<const double> pred) {
    require(truth.size() == pred.size(), ErrorCode::ShapeMismatch, "nrmse inputs differ in size");
    double sum = 0.0;
    std::size_t n = 0;
    for (double y : truth)
        if (!std::isnan(y)) {
            sum += y;
            ++n;
        }
    if (n == 0) fail(ErrorCode::ZeroVariance, "nrmse truth has no valid pixels");
    const double mean = sum / static_cast<double>(n);
    double var_sum = 0.0, err_sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (std::isnan(truth[i])) continue;
        var_sum += (truth[i] - mean) * (truth[i] - mean);
        err_sum += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    }
    if (!(var_sum > 0.0)) fail(ErrorCode::ZeroVariance, "nrmse truth is constant");
    // n * sigma^2 == var_sum
    return std::sqrt(err_sum / var_sum);
}

enum class Quartile { Q1, Q2, Q3, Q4 };

inline std::string_view to_string(Quartile q) {
    constexpr std::string_view names[] = {"Q1", "Q2", "Q3", "Q4"};
    return names[static_cast<int>(q)];
}

/// Rank quartiles: sort by (score, tie_key) and cut into 4 contiguous groups;
/// with n = 4q + r the first r groups hold q + 1. tie_keys defaults to the index.
inline std::vector<Quartile> quartile_bins(std::span<const double> scores, std::span<const std::uint32_t> tie_keys = {}) {
    const std::size_t n = scores.size();
    if (n < 4) fail(ErrorCode::TooFewScores, "quartile binning needs >= 4 scores, got " + std::to_string(n));
    require(tie_keys.empty() || tie_keys.size() == n, ErrorCode::ShapeMismatch, "tie keys do not match scores");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto key = [&](std::size_t i) { return tie_keys.empty() ? static_cast<std::uint32_t>(i) : tie_keys[i]; };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return key(a) < key(b);
    });
    std::vector<Quartile> out(n);
    const std::size_t q = n / 4, r = n % 4;
    std::size_t pos = 0;
    for (int g = 0; g < 4; ++g) {
        const std::size_t size = q + (static_cast<std::size_t>(g) < r ? 1 : 0);
        for (std::size_t k = 0; k < size; ++k) out[order[pos++]] = static_cast<Quartile>(g);
    }
    return out;
}

struct EvalEntry {
    std::uint32_t tile_id = 0;
    std::uint32_t band = 0;
    std::optional<double> nrmse;       // empty for constant-truth tiles
    std::optional<Quartile> quartile;  // empty when unscored or the band has < 4 scores
};

struct EvalReport {
    std::uint32_t target_t = 0;
    std::vector<EvalEntry> entries;                // tile-major, then band
    std::vector<std::optional<double>> band_mean;  // mean over scored tiles

    /// Mean over every scored (tile, band) entry.
    std::optional<double> overall_mean() const {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& e : entries)
            if (e.nrmse) {
                s += *e.nrmse;
                ++n;
            }
        if (n == 0) return std::nullopt;
        return s / static_cast<double>(n);
    }
};

/// Produces a normalized next frame from j normalized inputs.
using Predictor = std::function<Frame(std::span<const Frame> inputs, std::span<const double> cond,
                                      std::uint32_t tile_id, std::uint32_t band)>;

inline Predictor model_predictor(const ModelParams& params) {
    return [&params](std::span<const Frame> inputs, std::span<const double> cond, std::uint32_t, std::uint32_t) {
        return predict_frame(params, inputs, cond);
    };
}

/// Next frame := last input frame.
inline Predictor persistence_predictor() {
    return [](std::span<const Frame> inputs, std::span<const double>, std::uint32_t, std::uint32_t) {
        return inputs.back();
    };
}

namespace detail {

inline void attach_quartiles(EvalReport& report, std::uint32_t bands) {
    report.band_mean.assign(bands, std::nullopt);
    for (std::uint32_t b = 0; b < bands; ++b) {
        std::vector<std::size_t> idx;
        std::vector<double> scores;
        std::vector<std::uint32_t> keys;
        for (std::size_t i = 0; i < report.entries.size(); ++i) {
            const auto& e = report.entries[i];
            if (e.band == b && e.nrmse) {
                idx.push_back(i);
                scores.push_back(*e.nrmse);
                keys.push_back(e.tile_id);
            }
        }
        if (scores.empty()) continue;
        report.band_mean[b] = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
        if (scores.size() < 4) continue;
        const auto q = quartile_bins(scores, keys);
        for (std::size_t k = 0; k < idx.size(); ++k) report.entries[idx[k]].quartile = q[k];
    }
}

} // namespace detail

/// Predicted and observed frame at target_t for one (tile, band), in sensor units.
struct TilePrediction {
    Frame predicted;
    Frame truth; // nodata as NaN
};

inline TilePrediction predict_tile(const Predictor& predictor, const RasterSeries& series, const TilePlan& plan,
                                   const NormStats& stats, std::uint32_t j, std::uint32_t target_t,
                                   std::uint32_t tile_id, std::uint32_t band) {
    std::vector<Frame> inputs;
    for (auto t = target_t - j; t < target_t; ++t) inputs.push_back(apply(series, plan, stats, tile_id, band, t).values);
    const auto cond = condition_code(tile_id, band, plan.size());
    const auto normalized = predictor(inputs, cond, tile_id, band);
    TilePrediction out{invert(normalized, stats, tile_id, band), {}};
    const auto raw = crop_window(series, plan, tile_id, band, target_t);
    out.truth.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        out.truth[i] = series.is_nodata(raw[i]) ? std::numeric_limits<double>::quiet_NaN() : raw[i];
    return out;
}

/// Scores every (tile, band) at target_t using the j preceding frames.
inline EvalReport evaluate_with(const Predictor& predictor, const RasterSeries& series, const TilePlan& plan,
                                const NormStats& stats, std::uint32_t j, std::uint32_t target_t,
                                std::size_t threads = 1) {
    require(j >= 1 && target_t >= j, ErrorCode::InvalidArgument, "target_t must be >= j");
    require(target_t < series.t_len, ErrorCode::IndexOutOfRange, "target_t is past the end of the series");
    EvalReport report;
    report.target_t = target_t;
    const std::size_t pairs = plan.size() * series.bands;
    report.entries.resize(pairs);
    parallel_for(pairs, threads, [&](std::size_t, std::size_t k) {
        const auto tile = static_cast<std::uint32_t>(k / series.bands);
        const auto band = static_cast<std::uint32_t>(k % series.bands);
        auto& e = report.entries[k];
        e.tile_id = tile;
        e.band = band;
        const auto tp = predict_tile(predictor, series, plan, stats, j, target_t, tile, band);
        try {
            e.nrmse = nrmse(tp.truth, tp.predicted);
        } catch (const Error& err) {
            if (err.code() != ErrorCode::ZeroVariance) throw;
        }
    });
    detail::attach_quartiles(report, series.bands);
    return report;
}

inline EvalReport evaluate_year(const ModelParams& params, const RasterSeries& series, const TilePlan& plan,
                                const NormStats& stats, std::uint32_t target_t, std::size_t threads = 1) {
    require(params.config.tiles == plan.size(), ErrorCode::DimensionMismatch,
            "model was trained for " + std::to_string(params.config.tiles) + " tiles, plan has " +
                std::to_string(plan.size()));
    require(params.config.window == plan.window, ErrorCode::DimensionMismatch, "model window differs from plan window");
    return evaluate_with(model_predictor(params), series, plan, stats, params.config.j, target_t, threads);
}

// Report text file: "target_t=<t>", then "tile_id,band,nrmse|null,Q1..Q4|null"
// per entry, then "band,<b>,mean,<value|null>" per band.

inline std::string format_report(const EvalReport& report) {
    std::string out = "target_t=" + std::to_string(report.target_t) + "\n";
    for (const auto& e : report.entries)
        out += std::to_string(e.tile_id) + "," + std::to_string(e.band) + "," +
               (e.nrmse ? detail::format_double(*e.nrmse) : "null") + "," +
               (e.quartile ? std::string(to_string(*e.quartile)) : "null") + "\n";
    for (std::size_t b = 0; b < report.band_mean.size(); ++b)
        out += "band," + std::to_string(b) + ",mean," +
               (report.band_mean[b] ? detail::format_double(*report.band_mean[b]) : "null") + "\n";
    return out;
}

inline void write_report(const EvalReport& report, const std::filesystem::path& path) {
    detail::write_text(path, format_report(report));
}

} // namespace rtwin
