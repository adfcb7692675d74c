#pragma once

// Minimal reverse-mode differentiation: a Tape records one backward closure
// per operation and replays them in reverse. Only the layers the forecasting
// model needs are provided. All arithmetic is in double precision.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rtwin/error.hpp"

namespace rtwin::ag {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
    return s + "]";
}

namespace detail {
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // empty unless requires_grad
    bool requires_grad = false;
};
} // namespace detail

/// Shared handle to a value buffer and its gradient. Copies alias the same
/// storage; use clone() for an independent copy.
class Tensor {
public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
        : node_(std::make_shared<detail::Node>()) {
        if (values.size() != ag::numel(shape))
            fail(ErrorCode::ShapeMismatch, "tensor of shape " + shape_string(shape) + " given " +
                                               std::to_string(values.size()) + " values");
        node_->shape = std::move(shape);
        node_->value = std::move(values);
        node_->requires_grad = requires_grad;
        if (requires_grad) node_->grad.assign(node_->value.size(), 0.0);
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        const auto n = ag::numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    static Tensor scalar(double v, bool requires_grad = false) { return Tensor({}, {v}, requires_grad); }

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->value.size(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::span<const double> values() const { return node_->value; }
    std::span<double> mutable_values() { return node_->value; }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad() { return node_->grad; }

    double item() const {
        if (numel() != 1) fail(ErrorCode::ShapeMismatch, "item() on tensor of shape " + shape_string(shape()));
        return node_->value[0];
    }

    void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

    /// Deep copy with fresh zero gradients.
    Tensor clone() const { return Tensor(shape(), node_->value, requires_grad()); }

    /// Same values, cut off from gradient tracking.
    Tensor detach() const { return Tensor(shape(), node_->value, false); }

    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

/// Ordered record of applied operations. backward() replays the saved
/// closures in exact reverse order of recording and then clears the record.
class Tape {
public:
    void record(std::function<void()> backward) { ops_.push_back(std::move(backward)); }

    std::size_t size() const { return ops_.size(); }
    void clear() { ops_.clear(); }

    void backward(const Tensor& loss) {
        if (loss.numel() != 1) fail(ErrorCode::ShapeMismatch, "backward() needs a scalar loss");
        if (!loss.requires_grad()) {
            clear();
            return;
        }
        loss.node()->grad[0] += 1.0;
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
        clear();
    }

private:
    std::vector<std::function<void()>> ops_;
};

namespace detail {

inline bool any_grad(std::initializer_list<const Tensor*> ts) {
    for (const auto* t : ts)
        if (t && t->defined() && t->requires_grad()) return true;
    return false;
}

inline Tensor make_output(Shape shape, std::vector<double> values, bool requires_grad) {
    return Tensor(std::move(shape), std::move(values), requires_grad);
}

inline void expect(bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::ShapeMismatch, what);
}

/// Splits an optionally batched shape into (batch, per-sample shape).
inline std::pair<std::size_t, Shape> split_batch(const Shape& shape, std::size_t sample_rank, const char* op) {
    if (shape.size() == sample_rank) return {1, shape};
    expect(shape.size() == sample_rank + 1, std::string(op) + ": input has shape " + shape_string(shape));
    return {shape[0], Shape(shape.begin() + 1, shape.end())};
}

inline Shape with_batch(const Shape& in, std::size_t sample_rank, std::size_t batch, Shape sample) {
    if (in.size() == sample_rank) return sample;
    sample.insert(sample.begin(), batch);
    return sample;
}

template <typename Forward, typename Derivative>
Tensor unary(Tape& tape, const Tensor& x, Forward f, Derivative df) {
    std::vector<double> y(x.numel());
    const auto xv = x.values();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
    Tensor out = make_output(x.shape(), std::move(y), x.requires_grad());
    if (out.requires_grad()) {
        tape.record([xn = x.node(), on = out.node(), df] {
            for (std::size_t i = 0; i < on->value.size(); ++i) xn->grad[i] += on->grad[i] * df(xn->value[i], on->value[i]);
        });
    }
    return out;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise activations

inline Tensor relu(Tape& tape, const Tensor& x) {
    return detail::unary(tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
                         [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor sigmoid(Tape& tape, const Tensor& x) {
    return detail::unary(tape, x, detail::sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(Tape& tape, const Tensor& x) {
    return detail::unary(tape, x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

// ---------------------------------------------------------------------------
// Shape plumbing

inline Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
    detail::expect(ag::numel(shape) == x.numel(),
                   "reshape " + shape_string(x.shape()) + " -> " + shape_string(shape) + " changes element count");
    std::vector<double> v(x.values().begin(), x.values().end());
    Tensor out = detail::make_output(std::move(shape), std::move(v), x.requires_grad());
    if (out.requires_grad())
        tape.record([xn = x.node(), on = out.node()] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        });
    return out;
}

/// Concatenates two rank-1 tensors.
inline Tensor concat(Tape& tape, const Tensor& a, const Tensor& b) {
    detail::expect(a.rank() == 1 && b.rank() == 1, "concat expects rank-1 tensors, got " + shape_string(a.shape()) +
                                                       " and " + shape_string(b.shape()));
    std::vector<double> v(a.values().begin(), a.values().end());
    v.insert(v.end(), b.values().begin(), b.values().end());
    const std::size_t n = v.size();
    Tensor out = detail::make_output({n}, std::move(v), detail::any_grad({&a, &b}));
    if (out.requires_grad())
        tape.record([an = a.node(), bn = b.node(), on = out.node()] {
            const std::size_t na = an->value.size();
            if (an->requires_grad)
                for (std::size_t i = 0; i < na; ++i) an->grad[i] += on->grad[i];
            if (bn->requires_grad)
                for (std::size_t i = 0; i < bn->value.size(); ++i) bn->grad[i] += on->grad[na + i];
        });
    return out;
}

// ---------------------------------------------------------------------------
// Dense: y = W x + b, x is [n_in] or [N, n_in].

inline Tensor dense(Tape& tape, const Tensor& x, const Tensor& W, const Tensor& b) {
    detail::expect(W.rank() == 2, "dense weight must be rank 2, got " + shape_string(W.shape()));
    const std::size_t n_out = W.dim(0), n_in = W.dim(1);
    detail::expect(b.shape() == Shape{n_out}, "dense bias " + shape_string(b.shape()) + " does not match weight " +
                                                  shape_string(W.shape()));
    auto [batch, sample] = detail::split_batch(x.shape(), 1, "dense");
    detail::expect(sample[0] == n_in, "dense input " + shape_string(x.shape()) + " does not match weight " +
                                          shape_string(W.shape()));

    std::vector<double> y(batch * n_out);
    const auto xv = x.values(), wv = W.values(), bv = b.values();
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t o = 0; o < n_out; ++o) {
            double acc = bv[o];
            const double* wr = &wv[o * n_in];
            const double* xr = &xv[n * n_in];
            for (std::size_t i = 0; i < n_in; ++i) acc += wr[i] * xr[i];
            y[n * n_out + o] = acc;
        }
    Tensor out = detail::make_output(detail::with_batch(x.shape(), 1, batch, {n_out}), std::move(y),
                                     detail::any_grad({&x, &W, &b}));
    if (out.requires_grad())
        tape.record([xn = x.node(), wn = W.node(), bn = b.node(), on = out.node(), batch, n_in, n_out] {
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t o = 0; o < n_out; ++o) {
                    const double g = on->grad[n * n_out + o];
                    if (g == 0.0) continue;
                    if (bn->requires_grad) bn->grad[o] += g;
                    if (wn->requires_grad)
                        for (std::size_t i = 0; i < n_in; ++i) wn->grad[o * n_in + i] += g * xn->value[n * n_in + i];
                    if (xn->requires_grad)
                        for (std::size_t i = 0; i < n_in; ++i) xn->grad[n * n_in + i] += g * wn->value[o * n_in + i];
                }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Convolutions. Valid padding only; cross-correlation (no kernel flip).

namespace detail {

struct ConvGeom {
    std::size_t batch, c_in, c_out, h, w, k, stride, oh, ow;
};

// Core loops shared by conv2d forward and deconv2d backward (and vice versa).
// conv: out[co][oy][ox] += in[ci][oy*s+ky][ox*s+kx] * K[co][ci][ky][kx]
inline void conv_forward(const ConvGeom& g, const double* in, const double* K, double* out) {
    for (std::size_t co = 0; co < g.c_out; ++co)
        for (std::size_t ci = 0; ci < g.c_in; ++ci) {
            const double* kk = K + (co * g.c_in + ci) * g.k * g.k;
            const double* src = in + ci * g.h * g.w;
            double* dst = out + co * g.oh * g.ow;
            for (std::size_t oy = 0; oy < g.oh; ++oy)
                for (std::size_t ox = 0; ox < g.ow; ++ox) {
                    double acc = 0.0;
                    for (std::size_t ky = 0; ky < g.k; ++ky) {
                        const double* row = src + (oy * g.stride + ky) * g.w + ox * g.stride;
                        for (std::size_t kx = 0; kx < g.k; ++kx) acc += row[kx] * kk[ky * g.k + kx];
                    }
                    dst[oy * g.ow + ox] += acc;
                }
        }
}

// Adjoint of conv_forward w.r.t. its input: in[ci][oy*s+ky][ox*s+kx] += out[co][oy][ox] * K[co][ci][ky][kx]
inline void conv_input_adjoint(const ConvGeom& g, const double* out, const double* K, double* in) {
    for (std::size_t co = 0; co < g.c_out; ++co)
        for (std::size_t ci = 0; ci < g.c_in; ++ci) {
            const double* kk = K + (co * g.c_in + ci) * g.k * g.k;
            const double* src = out + co * g.oh * g.ow;
            double* dst = in + ci * g.h * g.w;
            for (std::size_t oy = 0; oy < g.oh; ++oy)
                for (std::size_t ox = 0; ox < g.ow; ++ox) {
                    const double v = src[oy * g.ow + ox];
                    if (v == 0.0) continue;
                    for (std::size_t ky = 0; ky < g.k; ++ky) {
                        double* row = dst + (oy * g.stride + ky) * g.w + ox * g.stride;
                        for (std::size_t kx = 0; kx < g.k; ++kx) row[kx] += v * kk[ky * g.k + kx];
                    }
                }
        }
}

// dK[co][ci][ky][kx] += sum over positions of in[ci][oy*s+ky][ox*s+kx] * out[co][oy][ox]
inline void conv_kernel_grad(const ConvGeom& g, const double* in, const double* out, double* dK) {
    for (std::size_t co = 0; co < g.c_out; ++co)
        for (std::size_t ci = 0; ci < g.c_in; ++ci) {
            double* kk = dK + (co * g.c_in + ci) * g.k * g.k;
            const double* src = in + ci * g.h * g.w;
            const double* go = out + co * g.oh * g.ow;
            for (std::size_t oy = 0; oy < g.oh; ++oy)
                for (std::size_t ox = 0; ox < g.ow; ++ox) {
                    const double v = go[oy * g.ow + ox];
                    if (v == 0.0) continue;
                    for (std::size_t ky = 0; ky < g.k; ++ky) {
                        const double* row = src + (oy * g.stride + ky) * g.w + ox * g.stride;
                        for (std::size_t kx = 0; kx < g.k; ++kx) kk[ky * g.k + kx] += v * row[kx];
                    }
                }
        }
}

inline void check_kernel(const Tensor& K, const char* op) {
    expect(K.rank() == 4 && K.dim(2) == K.dim(3),
           std::string(op) + " kernel must be [a x b x k x k], got " + shape_string(K.shape()));
}

inline void check_bias(const Tensor& bias, std::size_t channels, const char* op) {
    if (bias.defined())
        expect(bias.shape() == Shape{channels},
               std::string(op) + " bias " + shape_string(bias.shape()) + " needs " + std::to_string(channels) + " channels");
}

} // namespace detail

/// conv2d: x [C_in,H,W] (or [N,C_in,H,W]), K [C_out,C_in,k,k], optional bias
/// [C_out]. Output [C_out, (H-k)/s+1, (W-k)/s+1].
inline Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& K, const Tensor& bias, std::size_t stride) {
    detail::check_kernel(K, "conv2d");
    require(stride >= 1, ErrorCode::ShapeMismatch, "conv2d stride must be >= 1");
    auto [batch, sample] = detail::split_batch(x.shape(), 3, "conv2d");
    detail::ConvGeom g{batch, sample[0], K.dim(0), sample[1], sample[2], K.dim(2), stride, 0, 0};
    detail::expect(K.dim(1) == g.c_in, "conv2d kernel " + shape_string(K.shape()) + " does not match input " +
                                           shape_string(x.shape()));
    if (g.k > g.h || g.k > g.w)
        fail(ErrorCode::KernelTooLarge, "conv2d kernel " + std::to_string(g.k) + " larger than input " +
                                            shape_string(x.shape()));
    detail::check_bias(bias, g.c_out, "conv2d");
    g.oh = (g.h - g.k) / stride + 1;
    g.ow = (g.w - g.k) / stride + 1;

    const std::size_t in_sz = g.c_in * g.h * g.w, out_sz = g.c_out * g.oh * g.ow;
    std::vector<double> y(batch * out_sz, 0.0);
    for (std::size_t n = 0; n < batch; ++n) {
        double* dst = &y[n * out_sz];
        if (bias.defined())
            for (std::size_t co = 0; co < g.c_out; ++co)
                std::fill_n(dst + co * g.oh * g.ow, g.oh * g.ow, bias.values()[co]);
        detail::conv_forward(g, &x.values()[n * in_sz], K.values().data(), dst);
    }
    Tensor out = detail::make_output(detail::with_batch(x.shape(), 3, batch, {g.c_out, g.oh, g.ow}), std::move(y),
                                     detail::any_grad({&x, &K, &bias}));
    if (out.requires_grad())
        tape.record([xn = x.node(), kn = K.node(), bn = bias.node(), on = out.node(), g, in_sz, out_sz] {
            for (std::size_t n = 0; n < g.batch; ++n) {
                const double* go = &on->grad[n * out_sz];
                if (xn->requires_grad) detail::conv_input_adjoint(g, go, kn->value.data(), &xn->grad[n * in_sz]);
                if (kn->requires_grad) detail::conv_kernel_grad(g, &xn->value[n * in_sz], go, kn->grad.data());
                if (bn && bn->requires_grad)
                    for (std::size_t co = 0; co < g.c_out; ++co)
                        for (std::size_t p = 0; p < g.oh * g.ow; ++p) bn->grad[co] += go[co * g.oh * g.ow + p];
            }
        });
    return out;
}

inline Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& K, std::size_t stride) {
    return conv2d(tape, x, K, Tensor{}, stride);
}

/// Transposed convolution, the exact adjoint of conv2d with the same kernel.
/// x [C_in,H,W] (or batched), K [C_in,C_out,k,k] (the conv2d layout whose
/// output channels are this op's inputs), optional bias [C_out].
/// Output [C_out, (H-1)*s+k, (W-1)*s+k].
inline Tensor deconv2d(Tape& tape, const Tensor& x, const Tensor& K, const Tensor& bias, std::size_t stride) {
    detail::check_kernel(K, "deconv2d");
    require(stride >= 1, ErrorCode::ShapeMismatch, "deconv2d stride must be >= 1");
    auto [batch, sample] = detail::split_batch(x.shape(), 3, "deconv2d");
    detail::expect(K.dim(0) == sample[0], "deconv2d kernel " + shape_string(K.shape()) + " does not match input " +
                                              shape_string(x.shape()));
    // Geometry of the conv2d this op is the adjoint of: conv input = our output.
    const std::size_t k = K.dim(2);
    detail::ConvGeom g{batch, K.dim(1), K.dim(0), (sample[1] - 1) * stride + k, (sample[2] - 1) * stride + k,
                       k, stride, sample[1], sample[2]};
    detail::check_bias(bias, g.c_in, "deconv2d");

    const std::size_t in_sz = g.c_out * g.oh * g.ow, out_sz = g.c_in * g.h * g.w;
    std::vector<double> y(batch * out_sz, 0.0);
    for (std::size_t n = 0; n < batch; ++n) {
        double* dst = &y[n * out_sz];
        if (bias.defined())
            for (std::size_t c = 0; c < g.c_in; ++c) std::fill_n(dst + c * g.h * g.w, g.h * g.w, bias.values()[c]);
        detail::conv_input_adjoint(g, &x.values()[n * in_sz], K.values().data(), dst);
    }
    Tensor out = detail::make_output(detail::with_batch(x.shape(), 3, batch, {g.c_in, g.h, g.w}), std::move(y),
                                     detail::any_grad({&x, &K, &bias}));
    if (out.requires_grad())
        tape.record([xn = x.node(), kn = K.node(), bn = bias.node(), on = out.node(), g, in_sz, out_sz] {
            for (std::size_t n = 0; n < g.batch; ++n) {
                const double* go = &on->grad[n * out_sz];
                if (xn->requires_grad) detail::conv_forward(g, go, kn->value.data(), &xn->grad[n * in_sz]);
                if (kn->requires_grad) detail::conv_kernel_grad(g, go, &xn->value[n * in_sz], kn->grad.data());
                if (bn && bn->requires_grad)
                    for (std::size_t c = 0; c < g.c_in; ++c)
                        for (std::size_t p = 0; p < g.h * g.w; ++p) bn->grad[c] += go[c * g.h * g.w + p];
            }
        });
    return out;
}

inline Tensor deconv2d(Tape& tape, const Tensor& x, const Tensor& K, std::size_t stride) {
    return deconv2d(tape, x, K, Tensor{}, stride);
}

// ---------------------------------------------------------------------------
// LSTM cell. Gate rows are stacked in the order input, forget, candidate,
// output: W_x [4*d_h, d_in], W_h [4*d_h, d_h], b [4*d_h].

struct LstmWeights {
    Tensor w_x;
    Tensor w_h;
    Tensor b;
};

struct LstmState {
    Tensor h;
    Tensor c;
};

inline LstmState lstm_cell(Tape& tape, const Tensor& x, const Tensor& h, const Tensor& c, const LstmWeights& p) {
    detail::expect(p.w_x.rank() == 2 && p.w_h.rank() == 2 && p.b.rank() == 1, "lstm_cell weights have wrong rank");
    const std::size_t gates = p.w_x.dim(0), d_in = p.w_x.dim(1);
    detail::expect(gates % 4 == 0, "lstm_cell gate rows must be a multiple of 4");
    const std::size_t d_h = gates / 4;
    detail::expect(p.w_h.shape() == Shape{gates, d_h} && p.b.shape() == Shape{gates},
                   "lstm_cell recurrent weight or bias shape mismatch");
    auto [batch, xs] = detail::split_batch(x.shape(), 1, "lstm_cell");
    detail::expect(xs[0] == d_in, "lstm_cell input " + shape_string(x.shape()) + " needs " + std::to_string(d_in));
    detail::expect(h.shape() == c.shape() && numel(h.shape()) == batch * d_h && h.rank() == x.rank(),
                   "lstm_cell state shape " + shape_string(h.shape()) + " mismatch");

    // Saved activations per batch row: i, f, g, o, tanh(c').
    auto act = std::make_shared<std::vector<double>>(batch * 5 * d_h);
    std::vector<double> h_out(batch * d_h), c_out(batch * d_h);
    const auto wx = p.w_x.values(), wh = p.w_h.values(), bv = p.b.values();
    for (std::size_t n = 0; n < batch; ++n) {
        const double* xr = &x.values()[n * d_in];
        const double* hr = &h.values()[n * d_h];
        const double* cr = &c.values()[n * d_h];
        double* a = &(*act)[n * 5 * d_h];
        for (std::size_t r = 0; r < gates; ++r) {
            double z = bv[r];
            for (std::size_t i = 0; i < d_in; ++i) z += wx[r * d_in + i] * xr[i];
            for (std::size_t i = 0; i < d_h; ++i) z += wh[r * d_h + i] * hr[i];
            const std::size_t gate = r / d_h;
            a[r] = gate == 2 ? std::tanh(z) : detail::sigmoid(z);
        }
        for (std::size_t u = 0; u < d_h; ++u) {
            const double ig = a[u], fg = a[d_h + u], gg = a[2 * d_h + u], og = a[3 * d_h + u];
            const double cn = fg * cr[u] + ig * gg;
            const double tc = std::tanh(cn);
            a[4 * d_h + u] = tc;
            c_out[n * d_h + u] = cn;
            h_out[n * d_h + u] = og * tc;
        }
    }
    const bool rg = detail::any_grad({&x, &h, &c, &p.w_x, &p.w_h, &p.b});
    LstmState out{detail::make_output(h.shape(), std::move(h_out), rg), detail::make_output(c.shape(), std::move(c_out), rg)};
    if (rg)
        tape.record([xn = x.node(), hn = h.node(), cn = c.node(), wxn = p.w_x.node(), whn = p.w_h.node(),
                     bn = p.b.node(), ho = out.h.node(), co = out.c.node(), act, batch, d_in, d_h, gates] {
            std::vector<double> da(gates);
            for (std::size_t n = 0; n < batch; ++n) {
                const double* a = &(*act)[n * 5 * d_h];
                const double* c_prev = &cn->value[n * d_h];
                for (std::size_t u = 0; u < d_h; ++u) {
                    const double ig = a[u], fg = a[d_h + u], gg = a[2 * d_h + u], og = a[3 * d_h + u];
                    const double tc = a[4 * d_h + u];
                    const double dh = ho->grad[n * d_h + u];
                    const double dc = co->grad[n * d_h + u] + dh * og * (1.0 - tc * tc);
                    da[u] = dc * gg * ig * (1.0 - ig);
                    da[d_h + u] = dc * c_prev[u] * fg * (1.0 - fg);
                    da[2 * d_h + u] = dc * ig * (1.0 - gg * gg);
                    da[3 * d_h + u] = dh * tc * og * (1.0 - og);
                    if (cn->requires_grad) cn->grad[n * d_h + u] += dc * fg;
                }
                const double* xr = &xn->value[n * d_in];
                const double* hr = &hn->value[n * d_h];
                for (std::size_t r = 0; r < gates; ++r) {
                    const double g = da[r];
                    if (g == 0.0) continue;
                    if (bn->requires_grad) bn->grad[r] += g;
                    if (wxn->requires_grad)
                        for (std::size_t i = 0; i < d_in; ++i) wxn->grad[r * d_in + i] += g * xr[i];
                    if (whn->requires_grad)
                        for (std::size_t i = 0; i < d_h; ++i) whn->grad[r * d_h + i] += g * hr[i];
                    if (xn->requires_grad)
                        for (std::size_t i = 0; i < d_in; ++i) xn->grad[n * d_in + i] += g * wxn->value[r * d_in + i];
                    if (hn->requires_grad)
                        for (std::size_t i = 0; i < d_h; ++i) hn->grad[n * d_h + i] += g * whn->value[r * d_h + i];
                }
            }
        });
    return out;
}

// ---------------------------------------------------------------------------

/// Mean of squared differences; target is treated as a constant.
inline Tensor mse(Tape& tape, const Tensor& pred, const Tensor& target) {
    detail::expect(pred.shape() == target.shape(), "mse shapes differ: " + shape_string(pred.shape()) + " vs " +
                                                       shape_string(target.shape()));
    const auto p = pred.values(), t = target.values();
    const double n = static_cast<double>(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
    Tensor out = Tensor::scalar(acc / n, detail::any_grad({&pred, &target}));
    if (out.requires_grad())
        tape.record([pn = pred.node(), tn = target.node(), on = out.node(), n] {
            const double g = on->grad[0] * 2.0 / n;
            for (std::size_t i = 0; i < pn->value.size(); ++i) {
                const double d = g * (pn->value[i] - tn->value[i]);
                if (pn->requires_grad) pn->grad[i] += d;
                if (tn->requires_grad) tn->grad[i] -= d;
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { Adam, Sgd };

struct OptimizerOptions {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t step = 0;
};

/// Bias-corrected Adam update using each parameter's accumulated gradient.
inline void adam_step(std::span<Tensor> params, AdamState& state, const OptimizerOptions& opt) {
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.numel(), 0.0);
            state.v.emplace_back(p.numel(), 0.0);
        }
    }
    require(state.m.size() == params.size(), ErrorCode::ShapeMismatch, "adam state does not match parameter list");
    ++state.step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = params[k].mutable_values();
        const auto g = params[k].grad();
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
            w[i] -= opt.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt.eps);
        }
    }
}

inline void sgd_step(std::span<Tensor> params, const OptimizerOptions& opt) {
    for (auto& p : params) {
        auto w = p.mutable_values();
        const auto g = p.grad();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= opt.lr * g[i];
    }
}

/// Adam or plain SGD behind one call.
class Optimizer {
public:
    explicit Optimizer(OptimizerOptions opt) : opt_(opt) {}

    void step(std::span<Tensor> params) {
        if (opt_.kind == OptimizerKind::Adam) adam_step(params, adam_, opt_);
        else sgd_step(params, opt_);
    }

    const OptimizerOptions& options() const { return opt_; }

private:
    OptimizerOptions opt_;
    AdamState adam_;
};

} // namespace rtwin::ag
