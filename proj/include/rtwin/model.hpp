#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rtwin/autograd.hpp"
#include "rtwin/error.hpp"
#include "rtwin/rng.hpp"

namespace rtwin {

using Frame = std::vector<double>;

/// Kernel size and stride of every convolution stage.
inline constexpr std::size_t kConvKernel = 4;
inline constexpr std::size_t kConvStride = 4;
inline constexpr std::uint32_t kBandBits = 3;

/// Number of bits needed to address tile ids in [0, tiles).
inline std::uint32_t tile_bits(std::size_t tiles) {
    std::uint32_t bits = 0;
    while ((std::size_t{1} << bits) < tiles) ++bits;
    return bits;
}

struct ModelConfig {
    std::uint32_t window = 128;
    std::uint32_t j = 5;
    std::uint32_t d_feat = 128;
    std::uint32_t d_hidden = 128;
    std::uint32_t channels1 = 8;
    std::uint32_t channels2 = 16;
    std::uint32_t tiles = 1;     // plan size the condition code addresses
    std::uint32_t cond_bits = 3; // tile_bits(tiles) + 3 band bits

    static ModelConfig for_plan(std::uint32_t window, std::size_t tiles, std::uint32_t j = 5, std::uint32_t d_feat = 128,
                                std::uint32_t d_hidden = 128) {
        ModelConfig cfg;
        cfg.window = window;
        cfg.j = j;
        cfg.d_feat = d_feat;
        cfg.d_hidden = d_hidden;
        cfg.tiles = static_cast<std::uint32_t>(tiles);
        cfg.cond_bits = tile_bits(tiles) + kBandBits;
        return cfg;
    }

    /// Side of the feature map after both stride-4 stages.
    std::size_t coarse() const { return window / (kConvStride * kConvStride); }
    std::size_t flat() const { return channels2 * coarse() * coarse(); }

    void validate() const {
        require(window >= 16 && window % 16 == 0, ErrorCode::InvalidArgument, "model window must be a positive multiple of 16");
        require(j >= 1, ErrorCode::InvalidArgument, "sequence length j must be >= 1");
        require(d_feat >= 1 && d_hidden >= 1 && channels1 >= 1 && channels2 >= 1, ErrorCode::InvalidArgument,
                "model sizes must be >= 1");
        require(tiles >= 1, ErrorCode::InvalidArgument, "model must address at least one tile");
        require(cond_bits >= 1 && cond_bits == tile_bits(tiles) + kBandBits, ErrorCode::InvalidArgument,
                "cond_bits must equal tile_bits(tiles) + 3");
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class ParamGroup { Encoder, Temporal, Generator };

struct NamedParam {
    std::string name;
    ParamGroup group;
    ag::Tensor tensor;
};

/// Learnable weights of encoder, LSTM core and generator.
///
/// Deconvolution kernels use the [C_in, C_out, k, k] layout of ag::deconv2d.
struct ModelParams {
    ModelConfig config;

    ag::Tensor enc_conv1_w, enc_conv1_b;
    ag::Tensor enc_conv2_w, enc_conv2_b;
    ag::Tensor enc_proj_w, enc_proj_b;
    ag::LstmWeights lstm;
    ag::Tensor gen_proj_w, gen_proj_b;
    ag::Tensor gen_deconv1_w, gen_deconv1_b;
    ag::Tensor gen_deconv2_w, gen_deconv2_b;

    /// Handles alias the stored tensors, in a fixed order.
    std::vector<NamedParam> named() const {
        using G = ParamGroup;
        return {{"enc.conv1.w", G::Encoder, enc_conv1_w},     {"enc.conv1.b", G::Encoder, enc_conv1_b},
                {"enc.conv2.w", G::Encoder, enc_conv2_w},     {"enc.conv2.b", G::Encoder, enc_conv2_b},
                {"enc.proj.w", G::Encoder, enc_proj_w},       {"enc.proj.b", G::Encoder, enc_proj_b},
                {"lstm.w_x", G::Temporal, lstm.w_x},          {"lstm.w_h", G::Temporal, lstm.w_h},
                {"lstm.b", G::Temporal, lstm.b},              {"gen.proj.w", G::Generator, gen_proj_w},
                {"gen.proj.b", G::Generator, gen_proj_b},     {"gen.deconv1.w", G::Generator, gen_deconv1_w},
                {"gen.deconv1.b", G::Generator, gen_deconv1_b}, {"gen.deconv2.w", G::Generator, gen_deconv2_w},
                {"gen.deconv2.b", G::Generator, gen_deconv2_b}};
    }

    std::vector<ag::Tensor> tensors() const {
        std::vector<ag::Tensor> out;
        for (auto& p : named()) out.push_back(p.tensor);
        return out;
    }

    std::size_t count() const {
        std::size_t n = 0;
        for (const auto& p : named()) n += p.tensor.numel();
        return n;
    }

    void zero_grad() const {
        for (auto p : tensors()) p.zero_grad();
    }

    ModelParams clone() const {
        ModelParams out = *this;
        auto src = named();
        std::vector<ag::Tensor*> dst = out.slots();
        for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i].tensor.clone();
        return out;
    }

    /// Shapes of every tensor for a config, in named() order.
    static std::vector<ag::Shape> shapes(const ModelConfig& c) {
        const std::size_t k = kConvKernel;
        const std::size_t h4 = 4 * static_cast<std::size_t>(c.d_hidden);
        return {{c.channels1, 1, k, k},
                {c.channels1},
                {c.channels2, c.channels1, k, k},
                {c.channels2},
                {c.d_feat, c.flat()},
                {c.d_feat},
                {h4, c.d_feat},
                {h4, c.d_hidden},
                {h4},
                {c.flat(), static_cast<std::size_t>(c.d_hidden) + c.cond_bits},
                {c.flat()},
                {c.channels2, c.channels1, k, k},
                {c.channels1},
                {c.channels1, 1, k, k},
                {1}};
    }

    std::vector<ag::Tensor*> slots() {
        return {&enc_conv1_w, &enc_conv1_b, &enc_conv2_w, &enc_conv2_b, &enc_proj_w,    &enc_proj_b,
                &lstm.w_x,    &lstm.w_h,    &lstm.b,      &gen_proj_w,  &gen_proj_b,    &gen_deconv1_w,
                &gen_deconv1_b, &gen_deconv2_w, &gen_deconv2_b};
    }
};

inline std::size_t parameter_count(const ModelConfig& cfg) {
    std::size_t n = 0;
    for (const auto& s : ModelParams::shapes(cfg)) n += ag::numel(s);
    return n;
}

/// All-zero parameters of the right shapes.
inline ModelParams zero_params(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    const auto shapes = ModelParams::shapes(cfg);
    auto slots = p.slots();
    for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = ag::Tensor::zeros(shapes[i], true);
    return p;
}

/// Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero. Fans: dense
/// uses (cols, rows); kernels use channel counts times k*k.
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams p = zero_params(cfg);
    SplitMix64 rng(seed);
    for (auto* t : p.slots()) {
        const auto& s = t->shape();
        if (s.size() == 1) continue;
        double fan_in = 0, fan_out = 0;
        if (s.size() == 2) {
            fan_in = static_cast<double>(s[1]);
            fan_out = static_cast<double>(s[0]);
        } else {
            fan_in = static_cast<double>(s[1] * s[2] * s[3]);
            fan_out = static_cast<double>(s[0] * s[2] * s[3]);
        }
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& v : t->mutable_values()) v = rng.uniform(-limit, limit);
    }
    return p;
}

/// Tile id in tile_bits(plan_size) bits, most significant first, followed by
/// the band in 3 bits. Elements are 0.0 or 1.0.
inline std::vector<double> condition_code(std::size_t tile_id, std::size_t band, std::size_t plan_size) {
    if (tile_id >= plan_size)
        fail(ErrorCode::IndexOutOfRange, "tile id " + std::to_string(tile_id) + " >= plan size " + std::to_string(plan_size));
    if (band >= (std::size_t{1} << kBandBits))
        fail(ErrorCode::IndexOutOfRange, "band " + std::to_string(band) + " does not fit in 3 bits");
    const auto bits = tile_bits(plan_size);
    std::vector<double> code;
    code.reserve(bits + kBandBits);
    for (auto b = bits; b-- > 0;) code.push_back(static_cast<double>((tile_id >> b) & 1u));
    for (auto b = kBandBits; b-- > 0;) code.push_back(static_cast<double>((band >> b) & 1u));
    return code;
}

/// Encoder f: conv(1->c1,k4,s4) -> ReLU -> conv(c1->c2,k4,s4) -> ReLU -> flatten -> dense(d_feat).
/// frame has shape [window, window].
inline ag::Tensor encode(ag::Tape& tape, const ModelParams& p, const ag::Tensor& frame) {
    const auto& c = p.config;
    if (frame.shape() != ag::Shape{c.window, c.window})
        fail(ErrorCode::ShapeMismatch, "encoder expects a " + std::to_string(c.window) + "x" + std::to_string(c.window) +
                                           " frame, got " + ag::shape_string(frame.shape()));
    auto x = ag::reshape(tape, frame, {1, c.window, c.window});
    x = ag::relu(tape, ag::conv2d(tape, x, p.enc_conv1_w, p.enc_conv1_b, kConvStride));
    x = ag::relu(tape, ag::conv2d(tape, x, p.enc_conv2_w, p.enc_conv2_b, kConvStride));
    x = ag::reshape(tape, x, {c.flat()});
    return ag::dense(tape, x, p.enc_proj_w, p.enc_proj_b);
}

/// LSTM unrolled over the feature sequence from a zero state; returns the final hidden state.
inline ag::Tensor temporal(ag::Tape& tape, const ModelParams& p, std::span<const ag::Tensor> features) {
    if (features.size() != p.config.j)
        fail(ErrorCode::BadSequenceLength, "temporal core expects " + std::to_string(p.config.j) + " steps, got " +
                                               std::to_string(features.size()));
    const std::size_t dh = p.config.d_hidden;
    ag::LstmState s{ag::Tensor::zeros({dh}), ag::Tensor::zeros({dh})};
    for (const auto& v : features) s = ag::lstm_cell(tape, v, s.h, s.c, p.lstm);
    return s.h;
}

/// Generator G: [z, cond] -> dense(c2*coarse^2) -> reshape -> deconv(c2->c1) -> ReLU
/// -> deconv(c1->1) -> sigmoid. Output shape [window, window].
inline ag::Tensor generate(ag::Tape& tape, const ModelParams& p, const ag::Tensor& z, const ag::Tensor& cond) {
    const auto& c = p.config;
    if (cond.shape() != ag::Shape{c.cond_bits})
        fail(ErrorCode::ShapeMismatch, "condition code must have " + std::to_string(c.cond_bits) + " bits, got " +
                                           ag::shape_string(cond.shape()));
    if (z.shape() != ag::Shape{c.d_hidden})
        fail(ErrorCode::ShapeMismatch, "generator latent must have " + std::to_string(c.d_hidden) + " values");
    auto x = ag::dense(tape, ag::concat(tape, z, cond), p.gen_proj_w, p.gen_proj_b);
    x = ag::reshape(tape, x, {c.channels2, c.coarse(), c.coarse()});
    x = ag::relu(tape, ag::deconv2d(tape, x, p.gen_deconv1_w, p.gen_deconv1_b, kConvStride));
    x = ag::sigmoid(tape, ag::deconv2d(tape, x, p.gen_deconv2_w, p.gen_deconv2_b, kConvStride));
    return ag::reshape(tape, x, {c.window, c.window});
}

/// generate(temporal(encode(frame) for each frame), cond).
inline ag::Tensor predict(ag::Tape& tape, const ModelParams& p, std::span<const ag::Tensor> frames,
                          const ag::Tensor& cond) {
    std::vector<ag::Tensor> feats;
    feats.reserve(frames.size());
    for (const auto& f : frames) feats.push_back(encode(tape, p, f));
    return generate(tape, p, temporal(tape, p, feats), cond);
}

/// Inference on plain buffers; nothing is retained between calls.
inline Frame predict_frame(const ModelParams& p, std::span<const Frame> frames, std::span<const double> cond) {
    const std::size_t w = p.config.window;
    ag::Tape tape;
    std::vector<ag::Tensor> inputs;
    for (const auto& f : frames) inputs.emplace_back(ag::Shape{w, w}, f);
    ag::Tensor c({cond.size()}, std::vector<double>(cond.begin(), cond.end()));
    // The tape is dropped without backward(), so parameter gradients are untouched.
    auto out = predict(tape, p, inputs, c);
    return Frame(out.values().begin(), out.values().end());
}

} // namespace rtwin
