#pragma once

// Fixed-graph neural network kernels: 2-D convolution, dense layers,
// activations and Adam. Every op is a pure function of its arguments;
// gradients are computed explicitly per layer (no autodiff tape).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "radkd/error.hpp"
#include "radkd/random.hpp"
#include "radkd/tensor.hpp"

namespace radkd {

enum class Activation : std::uint32_t { None = 0, Relu = 1, Sigmoid = 2 };

inline float sigmoid(float x) {
    return 1.0f / (1.0f + std::exp(-x));
}

inline void apply_activation(std::span<float> v, Activation act) {
    switch (act) {
    case Activation::None:
        break;
    case Activation::Relu:
        for (float& x : v) x = x > 0.0f ? x : 0.0f;
        break;
    case Activation::Sigmoid:
        for (float& x : v) x = sigmoid(x);
        break;
    }
}

/// Turns d(loss)/d(output) into d(loss)/d(pre-activation) in place, given the
/// post-activation output.
inline void activation_backward(std::span<float> grad, std::span<const float> output, Activation act) {
    switch (act) {
    case Activation::None:
        break;
    case Activation::Relu:
        for (std::size_t i = 0; i < grad.size(); ++i)
            if (!(output[i] > 0.0f)) grad[i] = 0.0f;
        break;
    case Activation::Sigmoid:
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= output[i] * (1.0f - output[i]);
        break;
    }
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

struct Conv2dLayer {
    Tensor kernel; // [outC, inC, kH, kW]
    Tensor bias;   // [outC]
    std::array<std::size_t, 2> stride{1, 1};
    std::array<std::size_t, 2> padding{0, 0};
    Activation activation = Activation::None;

    static Conv2dLayer zeros(std::size_t out_c, std::size_t in_c, std::size_t k_h, std::size_t k_w,
                             std::array<std::size_t, 2> stride, std::array<std::size_t, 2> padding,
                             Activation act) {
        require(out_c > 0 && in_c > 0 && k_h > 0 && k_w > 0 && stride[0] > 0 && stride[1] > 0,
                ErrorKind::Config, "conv2d: extents and strides must be positive");
        return Conv2dLayer{Tensor({out_c, in_c, k_h, k_w}), Tensor({out_c}), stride, padding, act};
    }

    std::size_t out_channels() const { return kernel.dim(0); }
    std::size_t in_channels() const { return kernel.dim(1); }
    std::size_t kernel_h() const { return kernel.dim(2); }
    std::size_t kernel_w() const { return kernel.dim(3); }
    std::size_t parameter_count() const { return kernel.size() + bias.size(); }

    void validate() const {
        require(kernel.rank() == 4, ErrorKind::ShapeMismatch, "conv2d: kernel must be rank 4");
        require_shape(bias, {out_channels()}, "conv2d bias");
        require(stride[0] > 0 && stride[1] > 0, ErrorKind::Config, "conv2d: stride must be positive");
    }

    /// floor((in + 2p - k) / s) + 1 per spatial axis.
    std::array<std::size_t, 2> output_extent(std::size_t h, std::size_t w) const {
        const std::size_t ph = h + 2 * padding[0];
        const std::size_t pw = w + 2 * padding[1];
        require(ph >= kernel_h() && pw >= kernel_w(), ErrorKind::Config,
                "conv2d: kernel larger than padded input");
        return {(ph - kernel_h()) / stride[0] + 1, (pw - kernel_w()) / stride[1] + 1};
    }
};

namespace detail {

struct ConvGeometry {
    std::size_t in_c, in_h, in_w, k_h, k_w, s_h, s_w, p_h, p_w, out_h, out_w;
    std::size_t rows() const { return in_c * k_h * k_w; }
    std::size_t cols() const { return out_h * out_w; }
};

inline ConvGeometry conv_geometry(const Tensor& input, const Conv2dLayer& layer) {
    layer.validate();
    require(input.rank() == 3, ErrorKind::ShapeMismatch,
            "conv2d: input must be [C,H,W], got " + shape_str(input.shape()));
    require(input.dim(0) == layer.in_channels(), ErrorKind::ShapeMismatch,
            "conv2d: input has " + std::to_string(input.dim(0)) + " channels, layer expects " +
                std::to_string(layer.in_channels()));
    const auto [oh, ow] = layer.output_extent(input.dim(1), input.dim(2));
    return {input.dim(0),    input.dim(1),     input.dim(2),     layer.kernel_h(),
            layer.kernel_w(), layer.stride[0], layer.stride[1], layer.padding[0],
            layer.padding[1], oh,              ow};
}

/// Output columns [lo, hi) whose input column ox*s + k - p lies inside [0, n).
inline std::pair<std::size_t, std::size_t> valid_outputs(std::size_t n, std::size_t out_n, std::size_t s,
                                                         std::size_t k, std::size_t p) {
    std::size_t lo = 0;
    if (p > k) lo = (p - k + s - 1) / s;
    if (n + p <= k) return {0, 0};
    const std::size_t hi = std::min(out_n, (n - 1 + p - k) / s + 1);
    return {std::min(lo, hi), hi};
}

/// Unfolds input patches into a [inC*kH*kW, outH*outW] matrix (zero padded).
inline std::vector<float> im2col(const float* in, const ConvGeometry& g) {
    const std::size_t P = g.cols();
    std::vector<float> cols(g.rows() * P, 0.0f);
    for (std::size_t c = 0; c < g.in_c; ++c) {
        const float* plane = in + c * g.in_h * g.in_w;
        for (std::size_t ki = 0; ki < g.k_h; ++ki) {
            const auto [oy_lo, oy_hi] = valid_outputs(g.in_h, g.out_h, g.s_h, ki, g.p_h);
            for (std::size_t kj = 0; kj < g.k_w; ++kj) {
                const auto [ox_lo, ox_hi] = valid_outputs(g.in_w, g.out_w, g.s_w, kj, g.p_w);
                float* row = cols.data() + ((c * g.k_h + ki) * g.k_w + kj) * P;
                for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
                    const std::size_t iy = oy * g.s_h + ki - g.p_h;
                    const float* src = plane + iy * g.in_w;
                    float* dst = row + oy * g.out_w;
                    for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) dst[ox] = src[ox * g.s_w + kj - g.p_w];
                }
            }
        }
    }
    return cols;
}

/// Adjoint of im2col: scatters column gradients back onto the input grid.
inline void col2im(const std::vector<float>& cols, const ConvGeometry& g, float* out) {
    const std::size_t P = g.cols();
    std::fill(out, out + g.in_c * g.in_h * g.in_w, 0.0f);
    for (std::size_t c = 0; c < g.in_c; ++c) {
        float* plane = out + c * g.in_h * g.in_w;
        for (std::size_t ki = 0; ki < g.k_h; ++ki) {
            const auto [oy_lo, oy_hi] = valid_outputs(g.in_h, g.out_h, g.s_h, ki, g.p_h);
            for (std::size_t kj = 0; kj < g.k_w; ++kj) {
                const auto [ox_lo, ox_hi] = valid_outputs(g.in_w, g.out_w, g.s_w, kj, g.p_w);
                const float* row = cols.data() + ((c * g.k_h + ki) * g.k_w + kj) * P;
                for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
                    const std::size_t iy = oy * g.s_h + ki - g.p_h;
                    float* dst = plane + iy * g.in_w;
                    const float* src = row + oy * g.out_w;
                    for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) dst[ox * g.s_w + kj - g.p_w] += src[ox];
                }
            }
        }
    }
}

// Register-blocked products used by the convolution. Row-major throughout;
// A is addressed through explicit strides so a transpose costs nothing.

using vec8 = float __attribute__((vector_size(32)));

inline vec8 load8(const float* p) {
    vec8 v;
    std::memcpy(&v, p, sizeof(v));
    return v;
}

inline void store8(float* p, vec8 v) { std::memcpy(p, &v, sizeof(v)); }

inline float dot(const float* x, const float* y, std::size_t n) {
    vec8 acc = {};
    std::size_t p = 0;
    for (; p + 8 <= n; p += 8) acc += load8(x + p) * load8(y + p);
    float s = 0.0f;
    for (int t = 0; t < 8; ++t) s += acc[t];
    for (; p < n; ++p) s += x[p] * y[p];
    return s;
}

/// C[m][p] += sum_k A(m,k) * B[k][p], A(m,k) = a[m * a_rs + k * a_cs].
inline void gemm_accumulate(std::size_t M, std::size_t N, std::size_t K, const float* a, std::size_t a_rs,
                            std::size_t a_cs, const float* b, float* c) {
    constexpr std::size_t MB = 4, NB = 16;
    std::size_t m0 = 0;
    for (; m0 + MB <= M; m0 += MB) {
        std::size_t p0 = 0;
        for (; p0 + NB <= N; p0 += NB) {
            vec8 acc[MB][2];
            for (std::size_t q = 0; q < MB; ++q) {
                acc[q][0] = load8(c + (m0 + q) * N + p0);
                acc[q][1] = load8(c + (m0 + q) * N + p0 + 8);
            }
            for (std::size_t k = 0; k < K; ++k) {
                const vec8 b0 = load8(b + k * N + p0);
                const vec8 b1 = load8(b + k * N + p0 + 8);
                for (std::size_t q = 0; q < MB; ++q) {
                    const float av = a[(m0 + q) * a_rs + k * a_cs];
                    acc[q][0] += av * b0;
                    acc[q][1] += av * b1;
                }
            }
            for (std::size_t q = 0; q < MB; ++q) {
                store8(c + (m0 + q) * N + p0, acc[q][0]);
                store8(c + (m0 + q) * N + p0 + 8, acc[q][1]);
            }
        }
        for (std::size_t q = 0; q < MB; ++q)
            for (std::size_t k = 0; k < K; ++k) {
                const float av = a[(m0 + q) * a_rs + k * a_cs];
                for (std::size_t p = p0; p < N; ++p) c[(m0 + q) * N + p] += av * b[k * N + p];
            }
    }
    for (; m0 < M; ++m0) {
        float* crow = c + m0 * N;
        for (std::size_t k = 0; k < K; ++k) {
            const float av = a[m0 * a_rs + k * a_cs];
            const float* brow = b + k * N;
            for (std::size_t p = 0; p < N; ++p) crow[p] += av * brow[p];
        }
    }
}

/// C[m][n] = sum_p A[m][p] * B[n][p] (both operands row-major over p).
inline void gemm_nt(std::size_t M, std::size_t N, std::size_t P, const float* a, const float* b, float* c) {
    constexpr std::size_t MB = 2, NB = 4;
    auto hsum = [](vec8 v) {
        float s = 0.0f;
        for (int t = 0; t < 8; ++t) s += v[t];
        return s;
    };
    std::size_t m0 = 0;
    for (; m0 + MB <= M; m0 += MB) {
        std::size_t n0 = 0;
        for (; n0 + NB <= N; n0 += NB) {
            vec8 acc[MB][NB] = {};
            std::size_t p = 0;
            for (; p + 8 <= P; p += 8) {
                const vec8 a0 = load8(a + m0 * P + p);
                const vec8 a1 = load8(a + (m0 + 1) * P + p);
                for (std::size_t u = 0; u < NB; ++u) {
                    const vec8 bv = load8(b + (n0 + u) * P + p);
                    acc[0][u] += a0 * bv;
                    acc[1][u] += a1 * bv;
                }
            }
            for (std::size_t q = 0; q < MB; ++q)
                for (std::size_t u = 0; u < NB; ++u) {
                    float s = hsum(acc[q][u]);
                    for (std::size_t pp = p; pp < P; ++pp) s += a[(m0 + q) * P + pp] * b[(n0 + u) * P + pp];
                    c[(m0 + q) * N + n0 + u] = s;
                }
        }
        for (; n0 < N; ++n0)
            for (std::size_t q = 0; q < MB; ++q) c[(m0 + q) * N + n0] = dot(a + (m0 + q) * P, b + n0 * P, P);
    }
    for (; m0 < M; ++m0)
        for (std::size_t n = 0; n < N; ++n) c[m0 * N + n] = dot(a + m0 * P, b + n * P, P);
}

} // namespace detail

/// Cross-correlation with zero padding, bias and activation. input is [C,H,W].
inline Tensor conv2d_forward(const Tensor& input, const Conv2dLayer& layer) {
    const auto g = detail::conv_geometry(input, layer);
    const std::size_t P = g.cols();
    const std::size_t R = g.rows();
    const auto cols = detail::im2col(input.data(), g);

    Tensor out({layer.out_channels(), g.out_h, g.out_w});
    float* o = out.data();
    const float* k = layer.kernel.data();
    for (std::size_t oc = 0; oc < layer.out_channels(); ++oc)
        std::fill(o + oc * P, o + (oc + 1) * P, layer.bias[oc]);

    detail::gemm_accumulate(layer.out_channels(), P, R, k, R, 1, cols.data(), o);
    apply_activation(out.values(), layer.activation);
    require_finite(out, "conv2d_forward");
    return out;
}

struct Conv2dGrads {
    Tensor input;
    Tensor kernel;
    Tensor bias;
};

/// Gradients of conv2d_forward given its cached output.
/// With need_input_grad false, grads.input is left empty.
inline Conv2dGrads conv2d_backward(const Tensor& input, const Conv2dLayer& layer, const Tensor& output,
                                   const Tensor& grad_out, bool need_input_grad = true) {
    const auto g = detail::conv_geometry(input, layer);
    const Shape out_shape{layer.out_channels(), g.out_h, g.out_w};
    require_shape(output, out_shape, "conv2d_backward output");
    require_shape(grad_out, out_shape, "conv2d_backward grad_out");

    const std::size_t P = g.cols();
    const std::size_t R = g.rows();
    const std::size_t OC = layer.out_channels();

    std::vector<float> grad_pre(grad_out.values().begin(), grad_out.values().end());
    activation_backward(grad_pre, output.values(), layer.activation);

    Conv2dGrads grads{Tensor(), Tensor(layer.kernel.shape()), Tensor(layer.bias.shape())};
    for (std::size_t oc = 0; oc < OC; ++oc) {
        double s = 0.0;
        for (std::size_t p = 0; p < P; ++p) s += grad_pre[oc * P + p];
        grads.bias[oc] = static_cast<float>(s);
    }

    const auto cols = detail::im2col(input.data(), g);
    detail::gemm_nt(OC, R, P, grad_pre.data(), cols.data(), grads.kernel.data());

    if (need_input_grad) {
        grads.input = Tensor(input.shape());
        std::vector<float> grad_cols(R * P, 0.0f);
        // grad_cols = kernel^T * grad_pre
        detail::gemm_accumulate(R, P, OC, layer.kernel.data(), 1, R, grad_pre.data(), grad_cols.data());
        detail::col2im(grad_cols, g, grads.input.data());
        require_finite(grads.input, "conv2d_backward");
    }

    require_finite(grads.kernel, "conv2d_backward");
    require_finite(grads.bias, "conv2d_backward");
    return grads;
}

/// Recomputes the forward pass; prefer the four-argument overload in training loops.
inline Conv2dGrads conv2d_backward(const Tensor& input, const Conv2dLayer& layer, const Tensor& grad_out) {
    return conv2d_backward(input, layer, conv2d_forward(input, layer), grad_out);
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

struct DenseLayer {
    Tensor weights; // [out, in]
    Tensor bias;    // [out]
    Activation activation = Activation::None;

    static DenseLayer zeros(std::size_t out, std::size_t in, Activation act) {
        require(out > 0 && in > 0, ErrorKind::Config, "dense: extents must be positive");
        return DenseLayer{Tensor({out, in}), Tensor({out}), act};
    }

    std::size_t out_features() const { return weights.dim(0); }
    std::size_t in_features() const { return weights.dim(1); }

    void validate() const {
        require(weights.rank() == 2, ErrorKind::ShapeMismatch, "dense: weights must be rank 2");
        require_shape(bias, {out_features()}, "dense bias");
    }
};

/// Allocation-free kernel; out must have out_features() elements.
inline void dense_forward_into(std::span<const float> in, const DenseLayer& layer, std::span<float> out) {
    const std::size_t n_in = layer.in_features();
    const float* w = layer.weights.data();
    for (std::size_t o = 0; o < layer.out_features(); ++o) {
        float acc = layer.bias[o];
        const float* row = w + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * in[i];
        out[o] = acc;
    }
    apply_activation(out, layer.activation);
}

/// Accumulates parameter gradients into grad_w/grad_b and writes grad_in.
/// grad_out is consumed (overwritten with the pre-activation gradient).
inline void dense_backward_accumulate(std::span<const float> in, const DenseLayer& layer,
                                      std::span<const float> out, std::span<float> grad_out,
                                      std::span<float> grad_in, std::span<float> grad_w,
                                      std::span<float> grad_b) {
    activation_backward(grad_out, out, layer.activation);
    const std::size_t n_in = layer.in_features();
    const float* w = layer.weights.data();
    if (!grad_in.empty()) std::fill(grad_in.begin(), grad_in.end(), 0.0f);
    for (std::size_t o = 0; o < layer.out_features(); ++o) {
        const float go = grad_out[o];
        grad_b[o] += go;
        float* gw = grad_w.data() + o * n_in;
        const float* row = w + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) {
            gw[i] += go * in[i];
            if (!grad_in.empty()) grad_in[i] += go * row[i];
        }
    }
}

inline Tensor dense_forward(const Tensor& input, const DenseLayer& layer) {
    layer.validate();
    require_shape(input, {layer.in_features()}, "dense_forward input");
    Tensor out({layer.out_features()});
    dense_forward_into(input.values(), layer, out.values());
    require_finite(out, "dense_forward");
    return out;
}

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

inline DenseGrads dense_backward(const Tensor& input, const DenseLayer& layer, const Tensor& output,
                                 const Tensor& grad_out) {
    layer.validate();
    require_shape(input, {layer.in_features()}, "dense_backward input");
    require_shape(output, {layer.out_features()}, "dense_backward output");
    require_shape(grad_out, {layer.out_features()}, "dense_backward grad_out");
    DenseGrads g{Tensor(input.shape()), Tensor(layer.weights.shape()), Tensor(layer.bias.shape())};
    std::vector<float> go(grad_out.values().begin(), grad_out.values().end());
    dense_backward_accumulate(input.values(), layer, output.values(), go, g.input.values(),
                              g.weights.values(), g.bias.values());
    require_finite(g.input, "dense_backward");
    require_finite(g.weights, "dense_backward");
    return g;
}

inline DenseGrads dense_backward(const Tensor& input, const DenseLayer& layer, const Tensor& grad_out) {
    return dense_backward(input, layer, dense_forward(input, layer), grad_out);
}

// ---------------------------------------------------------------------------
// Initialisation
// ---------------------------------------------------------------------------

/// Uniform fan-in scaling: U(-b, b) with b = sqrt(6/fan_in) ahead of ReLU,
/// sqrt(3/fan_in) otherwise. Biases start at zero.
inline void init_uniform_fan_in(Tensor& weights, std::size_t fan_in, Activation act, Rng& rng) {
    const double bound = std::sqrt((act == Activation::Relu ? 6.0 : 3.0) / static_cast<double>(fan_in));
    for (float& w : weights.values()) w = static_cast<float>(rng.uniform(-bound, bound));
}

inline void init_layer(Conv2dLayer& layer, Rng& rng) {
    init_uniform_fan_in(layer.kernel, layer.in_channels() * layer.kernel_h() * layer.kernel_w(),
                        layer.activation, rng);
    layer.bias.fill(0.0f);
}

inline void init_layer(DenseLayer& layer, Rng& rng) {
    init_uniform_fan_in(layer.weights, layer.in_features(), layer.activation, rng);
    layer.bias.fill(0.0f);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

/// One bias-corrected Adam update. Moments are created on the first call.
inline void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state) {
    require(params.size() == grads.size(), ErrorKind::ShapeMismatch, "adam_step: params/grads count differ");
    if (state.first_moment.empty()) {
        for (const Tensor* p : params) {
            state.first_moment.emplace_back(p->shape());
            state.second_moment.emplace_back(p->shape());
        }
    }
    require(state.first_moment.size() == params.size(), ErrorKind::ShapeMismatch,
            "adam_step: state tracks a different parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_shape(grads[i], params[i]->shape(), "adam_step grad");
        require_shape(state.first_moment[i], params[i]->shape(), "adam_step moment");
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    const auto b1 = static_cast<float>(state.beta1);
    const auto b2 = static_cast<float>(state.beta2);
    for (std::size_t i = 0; i < params.size(); ++i) {
        float* p = params[i]->data();
        const float* g = grads[i].data();
        float* m = state.first_moment[i].data();
        float* v = state.second_moment[i].data();
        for (std::size_t k = 0; k < params[i]->size(); ++k) {
            m[k] = b1 * m[k] + (1.0f - b1) * g[k];
            v[k] = b2 * v[k] + (1.0f - b2) * g[k] * g[k];
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            p[k] -= static_cast<float>(state.lr * mhat / (std::sqrt(vhat) + state.epsilon));
        }
        require_finite(*params[i], "adam_step");
    }
}

} // namespace radkd
