#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rtwin/autograd.hpp"
#include "rtwin/binary.hpp"
#include "rtwin/error.hpp"
#include "rtwin/model.hpp"
#include "rtwin/normalize.hpp"
#include "rtwin/parallel.hpp"
#include "rtwin/raster_io.hpp"
#include "rtwin/rng.hpp"
#include "rtwin/text.hpp"
#include "rtwin/tiling.hpp"

namespace rtwin {

using FrameRef = std::shared_ptr<const Frame>;

/// j normalized input frames, the normalized frame that follows them, and the
/// generator condition. Frames are shared between overlapping samples.
struct TileSample {
    std::vector<FrameRef> inputs;
    FrameRef target;
    std::vector<double> cond;
    std::uint32_t tile_id = 0;
    std::uint32_t band = 0;
    std::uint32_t target_t = 0;
};

struct TrainConfig {
    std::uint32_t epochs = 10;
    std::uint32_t batch = 16;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    ag::OptimizerKind optimizer = ag::OptimizerKind::Adam;
    bool shuffle = true;
    std::uint32_t threads = 1; // does not affect results

    void validate() const {
        require(epochs >= 1, ErrorCode::InvalidArgument, "epochs must be >= 1");
        require(batch >= 1, ErrorCode::InvalidArgument, "batch must be >= 1");
        require(std::isfinite(lr) && lr >= 0.0, ErrorCode::InvalidArgument, "learning rate must be finite and >= 0");
    }

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Number of samples make_dataset emits.
inline std::size_t dataset_size(std::size_t tiles, std::size_t bands, std::size_t range_len, std::size_t j) {
    return range_len > j ? tiles * bands * (range_len - j) : 0;
}

/// One sample per (tile, band, start t) with [t, t+j] inside t_range. Order:
/// tile, then band, then start time.
inline std::vector<TileSample> make_dataset(const RasterSeries& series, const TilePlan& plan, const NormStats& stats,
                                            std::uint32_t j, TimeRange t_range) {
    require(j >= 1, ErrorCode::InvalidArgument, "j must be >= 1");
    require(t_range.end <= series.t_len && t_range.begin < t_range.end, ErrorCode::InvalidArgument,
            "time range is outside the series");
    if (t_range.size() <= j)
        fail(ErrorCode::RangeTooShort, "time range of " + std::to_string(t_range.size()) + " steps cannot hold j=" +
                                           std::to_string(j) + " inputs plus a target");
    require(stats.tiles == plan.size() && stats.bands == series.bands, ErrorCode::DimensionMismatch,
            "statistics do not match plan/series");

    std::vector<TileSample> out;
    out.reserve(dataset_size(plan.size(), series.bands, t_range.size(), j));
    for (const auto& tile : plan.tiles)
        for (std::uint32_t b = 0; b < series.bands; ++b) {
            std::vector<FrameRef> frames;
            for (auto t = t_range.begin; t < t_range.end; ++t)
                frames.push_back(std::make_shared<const Frame>(apply(series, plan, stats, tile.id, b, t).values));
            const auto cond = condition_code(tile.id, b, plan.size());
            for (std::uint32_t s = 0; s + j < t_range.size(); ++s) {
                TileSample sample;
                sample.inputs.assign(frames.begin() + s, frames.begin() + s + j);
                sample.target = frames[s + j];
                sample.cond = cond;
                sample.tile_id = tile.id;
                sample.band = b;
                sample.target_t = t_range.begin + s + j;
                out.push_back(std::move(sample));
            }
        }
    return out;
}

/// Forward + backward for one sample; gradients accumulate into p.
inline double sample_loss_and_grad(const ModelParams& p, const TileSample& s) {
    const std::size_t w = p.config.window;
    ag::Tape tape;
    std::vector<ag::Tensor> inputs;
    for (const auto& f : s.inputs) inputs.emplace_back(ag::Shape{w, w}, *f);
    ag::Tensor cond({s.cond.size()}, s.cond);
    ag::Tensor target({w, w}, *s.target);
    auto loss = ag::mse(tape, predict(tape, p, inputs, cond), target);
    tape.backward(loss);
    return loss.item();
}

struct TrainResult {
    ModelParams params;
    std::vector<double> loss_history; // epoch-mean loss, measured before each batch's update
};

/// Joint training of encoder, LSTM and generator on the MSE between the
/// generated frame and the target.
///
/// Each batch computes per-sample gradients independently and sums them in
/// sample order before one optimizer step, so results are bit-identical for
/// any thread count. batch=1 is the plain per-sample loop.
inline TrainResult train(const ModelParams& initial, const std::vector<TileSample>& dataset, const TrainConfig& config,
                         const std::function<void(std::uint32_t, double)>& on_epoch = {}) {
    config.validate();
    if (dataset.empty()) fail(ErrorCode::EmptyDataset, "training dataset is empty");

    TrainResult result{initial.clone(), {}};
    auto master = result.params.tensors();
    ag::Optimizer opt({config.optimizer, config.lr});
    SplitMix64 rng(config.seed);

    const std::size_t threads = std::max<std::uint32_t>(1, config.threads);
    std::vector<ModelParams> workers;
    for (std::size_t w = 0; w < std::min<std::size_t>(threads, config.batch); ++w) workers.push_back(initial.clone());

    std::vector<std::vector<double>> grads(config.batch, std::vector<double>(result.params.count()));
    std::vector<double> losses(config.batch);

    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle) order = seeded_permutation(dataset.size(), rng);
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t n = std::min<std::size_t>(config.batch, order.size() - start);
            for (auto& wp : workers) {
                auto dst = wp.tensors();
                for (std::size_t k = 0; k < dst.size(); ++k)
                    std::copy(master[k].values().begin(), master[k].values().end(), dst[k].mutable_values().begin());
            }
            parallel_for(n, workers.size(), [&](std::size_t w, std::size_t i) {
                const auto& wp = workers[w];
                wp.zero_grad();
                losses[i] = sample_loss_and_grad(wp, dataset[order[start + i]]);
                auto* g = grads[i].data();
                for (const auto& t : wp.tensors())
                    for (double v : t.grad()) *g++ = v;
            });
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite(losses[i]))
                    fail(ErrorCode::NonFiniteLoss, "non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                                                       std::to_string(order[start + i]));
                epoch_sum += losses[i];
            }
            const double scale = 1.0 / static_cast<double>(n);
            std::size_t offset = 0;
            for (auto& t : master) {
                auto g = t.mutable_grad();
                for (std::size_t e = 0; e < g.size(); ++e) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < n; ++i) acc += grads[i][offset + e];
                    g[e] = acc * scale;
                }
                offset += g.size();
            }
            opt.step(master);
        }
        const double mean = epoch_sum / static_cast<double>(dataset.size());
        result.loss_history.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    result.params.zero_grad();
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoint: "CKP1", u32 version, u32 array count, then per array
// (u16 name length, name, u8 ndim, u32 dims[], f64 payload), then a u32-framed
// block of key=value config lines.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelParams params;
    TrainConfig train;
};

namespace detail {

inline std::string format_config(const ModelConfig& m, const TrainConfig& t) {
    std::string s;
    auto kv = [&](const char* k, const std::string& v) { s += std::string(k) + "=" + v + "\n"; };
    kv("window", std::to_string(m.window));
    kv("j", std::to_string(m.j));
    kv("d_feat", std::to_string(m.d_feat));
    kv("d_hidden", std::to_string(m.d_hidden));
    kv("channels1", std::to_string(m.channels1));
    kv("channels2", std::to_string(m.channels2));
    kv("tiles", std::to_string(m.tiles));
    kv("cond_bits", std::to_string(m.cond_bits));
    kv("epochs", std::to_string(t.epochs));
    kv("batch", std::to_string(t.batch));
    kv("lr", format_double(t.lr));
    kv("seed", std::to_string(t.seed));
    kv("optimizer", t.optimizer == ag::OptimizerKind::Adam ? "adam" : "sgd");
    kv("shuffle", t.shuffle ? "1" : "0");
    return s;
}

inline std::pair<ModelConfig, TrainConfig> parse_config(std::string_view text) {
    std::map<std::string, std::string, std::less<>> kv;
    for (auto line : lines(text)) {
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        require(eq != std::string_view::npos, ErrorCode::BadRecord, "config line without '=': " + std::string(line));
        kv[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
    }
    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) fail(ErrorCode::BadRecord, std::string("checkpoint config lacks '") + key + "'");
        return it->second;
    };
    auto u32 = [&](const char* key) { return parse_number<std::uint32_t>(get(key), ErrorCode::BadRecord, key); };
    ModelConfig m;
    m.window = u32("window");
    m.j = u32("j");
    m.d_feat = u32("d_feat");
    m.d_hidden = u32("d_hidden");
    m.channels1 = u32("channels1");
    m.channels2 = u32("channels2");
    m.tiles = u32("tiles");
    m.cond_bits = u32("cond_bits");
    TrainConfig t;
    t.epochs = u32("epochs");
    t.batch = u32("batch");
    t.lr = parse_number<double>(get("lr"), ErrorCode::BadRecord, "lr");
    t.seed = parse_number<std::uint64_t>(get("seed"), ErrorCode::BadRecord, "seed");
    const auto& o = get("optimizer");
    if (o == "adam") t.optimizer = ag::OptimizerKind::Adam;
    else if (o == "sgd") t.optimizer = ag::OptimizerKind::Sgd;
    else fail(ErrorCode::BadRecord, "unknown optimizer '" + o + "'");
    t.shuffle = u32("shuffle") != 0;
    return {m, t};
}

} // namespace detail

inline std::vector<char> encode_checkpoint(const ModelParams& params, const TrainConfig& train) {
    detail::ByteWriter w;
    w.bytes("CKP1");
    w.u32(kCheckpointVersion);
    const auto named = params.named();
    w.u32(static_cast<std::uint32_t>(named.size()));
    for (const auto& p : named) {
        w.u16(static_cast<std::uint16_t>(p.name.size()));
        w.bytes(p.name);
        w.u8(static_cast<std::uint8_t>(p.tensor.rank()));
        for (auto d : p.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
        for (double v : p.tensor.values()) w.f64(v);
    }
    const auto cfg = detail::format_config(params.config, train);
    w.u32(static_cast<std::uint32_t>(cfg.size()));
    w.bytes(cfg);
    return w.data();
}

inline Checkpoint decode_checkpoint(std::span<const char> bytes) {
    detail::ByteReader r(bytes);
    if (r.remaining() < 4 || r.bytes(4, "magic") != "CKP1") fail(ErrorCode::BadMagic, "not a CKP1 checkpoint");
    const auto version = r.u32("version");
    if (version != kCheckpointVersion)
        fail(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                             std::to_string(kCheckpointVersion));
    const auto count = r.u32("array count");
    std::map<std::string, ag::Tensor, std::less<>> arrays;
    for (std::uint32_t a = 0; a < count; ++a) {
        const auto len = r.u16("array name length");
        std::string name(r.bytes(len, "array name"));
        const auto ndim = r.u8("array rank");
        ag::Shape shape;
        for (std::uint8_t d = 0; d < ndim; ++d) shape.push_back(r.u32("array dims"));
        const auto n = ag::numel(shape);
        r.need(8 * n, "array payload");
        std::vector<double> values(n);
        for (auto& v : values) v = r.f64("array payload");
        arrays.emplace(std::move(name), ag::Tensor(std::move(shape), std::move(values), true));
    }
    const auto cfg_len = r.u32("config length");
    const auto [model_cfg, train_cfg] = detail::parse_config(r.bytes(cfg_len, "config block"));
    require(r.remaining() == 0, ErrorCode::TrailingBytes, "checkpoint has bytes after the config block");

    Checkpoint ck{zero_params(model_cfg), train_cfg};
    auto names = ck.params.named();
    auto slots = ck.params.slots();
    require(arrays.size() == names.size(), ErrorCode::BadRecord, "checkpoint array count does not match the model");
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto it = arrays.find(names[i].name);
        if (it == arrays.end()) fail(ErrorCode::BadRecord, "checkpoint lacks array " + names[i].name);
        require(it->second.shape() == names[i].tensor.shape(), ErrorCode::BadRecord,
                "array " + names[i].name + " has shape " + ag::shape_string(it->second.shape()));
        *slots[i] = it->second;
    }
    return ck;
}

inline void save_checkpoint(const ModelParams& params, const TrainConfig& train, const std::filesystem::path& path) {
    detail::write_file(path, encode_checkpoint(params, train));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(detail::read_file(path));
}

} // namespace rtwin
