#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "rtwin/binary.hpp"
#include "rtwin/error.hpp"
#include "rtwin/rng.hpp"

namespace rtwin {

/// T x B x H x W stack of f32 samples, t-major then band, row, column.
struct RasterSeries {
    std::uint32_t t_len = 0;
    std::uint32_t bands = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    float nodata = std::numeric_limits<float>::quiet_NaN();
    std::vector<float> samples;

    static RasterSeries filled(std::uint32_t t_len, std::uint32_t bands, std::uint32_t height,
                               std::uint32_t width, float value, float nodata = std::numeric_limits<float>::quiet_NaN()) {
        RasterSeries s{t_len, bands, height, width, nodata, {}};
        s.samples.assign(s.expected_size(), value);
        return s;
    }

    std::size_t expected_size() const {
        return static_cast<std::size_t>(t_len) * bands * height * width;
    }

    std::size_t frame_size() const { return static_cast<std::size_t>(height) * width; }

    std::size_t index(std::size_t t, std::size_t b, std::size_t r, std::size_t c) const {
        return ((t * bands + b) * height + r) * width + c;
    }

    float at(std::size_t t, std::size_t b, std::size_t r, std::size_t c) const { return samples[index(t, b, r, c)]; }
    float& at(std::size_t t, std::size_t b, std::size_t r, std::size_t c) { return samples[index(t, b, r, c)]; }

    bool is_nodata(float v) const { return std::isnan(nodata) ? std::isnan(v) : v == nodata; }

    /// Throws if any RasterSeries invariant is violated.
    void validate() const {
        require(t_len >= 1 && bands >= 1 && height >= 1 && width >= 1, ErrorCode::BadHeader,
                "raster dimensions must all be >= 1");
        require(!std::isinf(nodata), ErrorCode::NonFiniteHeader, "nodata sentinel must be finite or NaN");
        require(samples.size() == expected_size(), ErrorCode::DimensionMismatch,
                "sample count does not match t_len*bands*height*width");
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (!std::isfinite(samples[i]) && !is_nodata(samples[i]))
                fail(ErrorCode::NonFiniteSample, "sample " + std::to_string(i) + " is non-finite and not the nodata sentinel");
    }

    friend bool operator==(const RasterSeries&, const RasterSeries&) = default;
};

struct StudyMask {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<std::uint8_t> inside; // row-major, 0 or 1

    static StudyMask filled(std::uint32_t height, std::uint32_t width, bool value) {
        return {height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, value ? 1 : 0)};
    }

    bool at(std::size_t r, std::size_t c) const { return inside[r * width + c] != 0; }
    void set(std::size_t r, std::size_t c, bool v) { inside[r * width + c] = v ? 1 : 0; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : inside) n += v;
        return n;
    }

    friend bool operator==(const StudyMask&, const StudyMask&) = default;
};

struct SynthSpec {
    std::uint32_t t_len = 20;
    std::uint32_t bands = 2;
    std::uint32_t height = 96;
    std::uint32_t width = 96;
    double trend = 0.0;
    double season_amp = 0.0;
    double season_period = 4.0;
    double noise_sd = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        require(t_len >= 2, ErrorCode::InvalidArgument, "synth t_len must be >= 2");
        require(bands >= 1 && height >= 1 && width >= 1, ErrorCode::InvalidArgument, "synth dimensions must be >= 1");
        require(noise_sd >= 0.0, ErrorCode::InvalidArgument, "synth noise_sd must be >= 0");
        require(season_period > 0.0, ErrorCode::InvalidArgument, "synth season_period must be > 0");
    }
};

/// Half-open range of time-step indices [begin, end).
struct TimeRange {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;

    std::uint32_t size() const { return end > begin ? end - begin : 0; }
    bool contains(std::uint32_t t) const { return t >= begin && t < end; }

    friend bool operator==(const TimeRange&, const TimeRange&) = default;
};

inline constexpr std::size_t kRtsHeaderSize = 24;

// ---------------------------------------------------------------------------
// RTS v1: "RTS1", u32 t_len, u32 bands, u32 height, u32 width, f32 nodata,
// then the f32 payload. All little-endian.

inline std::vector<char> encode_rts(const RasterSeries& series) {
    series.validate();
    detail::ByteWriter w;
    w.bytes("RTS1");
    w.u32(series.t_len);
    w.u32(series.bands);
    w.u32(series.height);
    w.u32(series.width);
    w.f32(series.nodata);
    for (float v : series.samples) w.f32(v);
    return w.data();
}

inline RasterSeries decode_rts(std::span<const char> bytes) {
    detail::ByteReader r(bytes);
    if (r.remaining() < 4 || r.bytes(4, "magic") != "RTS1") fail(ErrorCode::BadMagic, "not an RTS1 file");
    RasterSeries s;
    s.t_len = r.u32("header");
    s.bands = r.u32("header");
    s.height = r.u32("header");
    s.width = r.u32("header");
    s.nodata = r.f32("header");
    require(s.t_len >= 1 && s.bands >= 1 && s.height >= 1 && s.width >= 1, ErrorCode::BadHeader,
            "RTS dimensions must all be >= 1");
    require(!std::isinf(s.nodata), ErrorCode::NonFiniteHeader, "RTS nodata sentinel is infinite");
    const auto n = s.expected_size();
    if (r.remaining() / 4 < n)
        fail(ErrorCode::TruncatedPayload, "RTS payload declares " + std::to_string(n) + " samples but file holds " +
                                              std::to_string(r.remaining() / 4));
    require(r.remaining() == 4 * n, ErrorCode::TrailingBytes, "RTS file has bytes after the payload");
    s.samples.resize(n);
    for (auto& v : s.samples) v = r.f32("payload");
    s.validate();
    return s;
}

inline RasterSeries read_rts(const std::filesystem::path& path) { return decode_rts(detail::read_file(path)); }

inline void write_rts(const RasterSeries& series, const std::filesystem::path& path) {
    detail::write_file(path, encode_rts(series));
}

// ---------------------------------------------------------------------------
// MSK v1: "MSK1", u32 height, u32 width, then height*width bytes of 0/1.

inline std::vector<char> encode_mask(const StudyMask& mask) {
    require(mask.inside.size() == static_cast<std::size_t>(mask.height) * mask.width, ErrorCode::DimensionMismatch,
            "mask payload size does not match height*width");
    detail::ByteWriter w;
    w.bytes("MSK1");
    w.u32(mask.height);
    w.u32(mask.width);
    for (auto v : mask.inside) {
        require(v <= 1, ErrorCode::BadByte, "mask value must be 0 or 1");
        w.u8(v);
    }
    return w.data();
}

inline StudyMask decode_mask(std::span<const char> bytes) {
    detail::ByteReader r(bytes);
    if (r.remaining() < 4 || r.bytes(4, "magic") != "MSK1") fail(ErrorCode::BadMagic, "not an MSK1 file");
    StudyMask m;
    m.height = r.u32("header");
    m.width = r.u32("header");
    require(m.height >= 1 && m.width >= 1, ErrorCode::BadHeader, "mask dimensions must be >= 1");
    const std::size_t n = static_cast<std::size_t>(m.height) * m.width;
    if (r.remaining() < n)
        fail(ErrorCode::TruncatedPayload, "MSK payload declares " + std::to_string(n) + " bytes but file holds " +
                                              std::to_string(r.remaining()));
    require(r.remaining() == n, ErrorCode::TrailingBytes, "MSK file has bytes after the payload");
    m.inside.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = r.u8("payload");
        if (b > 1) fail(ErrorCode::BadByte, "mask byte " + std::to_string(i) + " is " + std::to_string(b));
        m.inside[i] = b;
    }
    return m;
}

inline StudyMask read_mask(const std::filesystem::path& path) { return decode_mask(detail::read_file(path)); }

inline void write_mask(const StudyMask& mask, const std::filesystem::path& path) {
    detail::write_file(path, encode_mask(mask));
}

// ---------------------------------------------------------------------------

/// Ellipse inscribed in the grid, tested at pixel centres.
inline StudyMask inscribed_ellipse(std::uint32_t height, std::uint32_t width) {
    auto mask = StudyMask::filled(height, width, false);
    const double ry = height / 2.0;
    const double rx = width / 2.0;
    for (std::uint32_t r = 0; r < height; ++r)
        for (std::uint32_t c = 0; c < width; ++c) {
            const double dy = (r + 0.5 - ry) / ry;
            const double dx = (c + 0.5 - rx) / rx;
            mask.set(r, c, dy * dy + dx * dx <= 1.0);
        }
    return mask;
}

/// Synthetic series with smooth spatial structure:
///
///   sample[t][b][r][c] = base(b,r,c) + trend*t
///                        + season_amp*sin(2*pi*t/season_period + phase(r,c))
///                        + noise_sd*N(0,1)
///
/// Draw order from SplitMix64(seed): per band (offset, amp, fr, fc, sr, sc),
/// then (pr, pc, p0), then one Box-Muller normal per sample in storage order.
///   base(b,r,c)  = offset_b + amp_b*sin(2*pi*(fr_b*r/H + sr_b))*cos(2*pi*(fc_b*c/W + sc_b))
///   phase(r,c)   = p0 + 2*pi*(pr*r/H + pc*c/W)
/// with offset in [20,30), amp in [1,3), fr,fc in [0.5,1.5), sr,sc in [0,1),
/// pr,pc in [0,1.5), p0 in [0,2*pi).
inline std::pair<RasterSeries, StudyMask> synth_series(const SynthSpec& spec) {
    spec.validate();
    constexpr double two_pi = 2.0 * std::numbers::pi;
    SplitMix64 rng(spec.seed);

    struct BandField {
        double offset, amp, fr, fc, sr, sc;
    };
    std::vector<BandField> fields(spec.bands);
    for (auto& f : fields) {
        f.offset = rng.uniform(20.0, 30.0);
        f.amp = rng.uniform(1.0, 3.0);
        f.fr = rng.uniform(0.5, 1.5);
        f.fc = rng.uniform(0.5, 1.5);
        f.sr = rng.uniform();
        f.sc = rng.uniform();
    }
    const double pr = rng.uniform(0.0, 1.5);
    const double pc = rng.uniform(0.0, 1.5);
    const double p0 = rng.uniform(0.0, two_pi);

    const double H = spec.height;
    const double W = spec.width;
    auto series = RasterSeries::filled(spec.t_len, spec.bands, spec.height, spec.width, 0.0f);
    for (std::uint32_t t = 0; t < spec.t_len; ++t)
        for (std::uint32_t b = 0; b < spec.bands; ++b) {
            const auto& f = fields[b];
            for (std::uint32_t r = 0; r < spec.height; ++r)
                for (std::uint32_t c = 0; c < spec.width; ++c) {
                    const double base = f.offset + f.amp * std::sin(two_pi * (f.fr * r / H + f.sr)) *
                                                       std::cos(two_pi * (f.fc * c / W + f.sc));
                    const double phase = p0 + two_pi * (pr * r / H + pc * c / W);
                    const double noise = rng.gaussian();
                    const double v = base + spec.trend * t +
                                     spec.season_amp * std::sin(two_pi * t / spec.season_period + phase) +
                                     spec.noise_sd * noise;
                    series.at(t, b, r, c) = static_cast<float>(v);
                }
        }
    return {std::move(series), inscribed_ellipse(spec.height, spec.width)};
}

} // namespace rtwin
