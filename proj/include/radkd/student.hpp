#pragma once

// End-to-end CNN student. Input is the centred 30-bin azimuth crop of a frame
// plus two CoordConv channels; output is one probability per range bin.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "radkd/error.hpp"
#include "radkd/nn.hpp"
#include "radkd/random.hpp"
#include "radkd/tensor.hpp"

namespace radkd {

inline constexpr std::size_t kCropWidth = 30;
inline constexpr std::size_t kStudentStages = 5;

/// Centred window: (256 - 30) / 2 = 113 for the default grid.
inline constexpr std::size_t centered_crop_offset(std::size_t n_azimuth, std::size_t width = kCropWidth) {
    return (n_azimuth - width) / 2;
}

/// Copies azimuth bins [offset, offset + width) of a [n_range, n_azimuth] map.
inline Tensor crop_azimuth(const Tensor& map, std::size_t offset, std::size_t width = kCropWidth) {
    require(map.rank() == 2, ErrorKind::ShapeMismatch, "crop_azimuth: map must be rank 2");
    const std::size_t nr = map.dim(0), na = map.dim(1);
    require(offset + width <= na, ErrorKind::Config,
            "crop_azimuth: window " + std::to_string(offset) + "+" + std::to_string(width) + " exceeds " +
                std::to_string(na) + " azimuth bins");
    Tensor out({nr, width});
    for (std::size_t j = 0; j < nr; ++j)
        std::copy_n(map.data() + j * na + offset, width, out.data() + j * width);
    return out;
}

/// R[n, :] = n / R_max and A[:, m] = 2 |(m - A_max/2) / A_max|, with R_max and
/// A_max the largest range and azimuth indices.
inline std::pair<Tensor, Tensor> coordconv_channels(std::size_t n_range, std::size_t n_azimuth = kCropWidth) {
    require(n_range > 1 && n_azimuth > 1, ErrorKind::Config, "coordconv_channels: need at least 2 bins per axis");
    Tensor r({n_range, n_azimuth}), a({n_range, n_azimuth});
    const double r_max = static_cast<double>(n_range - 1);
    const double a_max = static_cast<double>(n_azimuth - 1);
    for (std::size_t n = 0; n < n_range; ++n) {
        const auto rv = static_cast<float>(static_cast<double>(n) / r_max);
        for (std::size_t m = 0; m < n_azimuth; ++m) {
            r.at(n, m) = rv;
            a.at(n, m) = static_cast<float>(2.0 * std::abs((static_cast<double>(m) - a_max / 2.0) / a_max));
        }
    }
    return {std::move(r), std::move(a)};
}

/// Magnitude compression applied to the map channel before the network.
inline float encode_magnitude(float v) { return std::log1p(std::max(v, 0.0f)); }

/// [3, n_range, 30]: compressed crop, range channel, azimuth channel.
inline Tensor make_student_input(const Tensor& map, std::size_t offset) {
    const Tensor crop = crop_azimuth(map, offset);
    const std::size_t nr = crop.dim(0), w = crop.dim(1), plane = nr * w;
    const auto [r, a] = coordconv_channels(nr, w);
    Tensor input({3, nr, w});
    float* dst = input.data();
    for (std::size_t c = 0; c < plane; ++c) dst[c] = encode_magnitude(crop[c]);
    std::copy_n(r.data(), plane, dst + plane);
    std::copy_n(a.data(), plane, dst + 2 * plane);
    return input;
}

struct StudentModel {
    std::array<Conv2dLayer, kStudentStages> layers;
    std::size_t crop_offset = centered_crop_offset(256);

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.parameter_count();
        return n;
    }

    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> p;
        for (auto& l : layers) {
            p.push_back(&l.kernel);
            p.push_back(&l.bias);
        }
        return p;
    }

    /// Composed output must be [1, n_range, 1] with a 3x1 sigmoid head.
    void validate(std::size_t n_range = 464) const {
        for (const auto& l : layers) l.validate();
        require(layers.front().in_channels() == 3, ErrorKind::ShapeMismatch, "student: first stage must take 3 channels");
        for (std::size_t i = 1; i < kStudentStages; ++i)
            require(layers[i].in_channels() == layers[i - 1].out_channels(), ErrorKind::ShapeMismatch,
                    "student: stage " + std::to_string(i) + " channel mismatch");
        const auto& head = layers.back();
        require(head.kernel_h() == 3 && head.kernel_w() == 1 && head.out_channels() == 1 &&
                    head.activation == Activation::Sigmoid,
                ErrorKind::ShapeMismatch, "student: final stage must be a 1-channel 3x1 sigmoid convolution");
        std::size_t h = n_range, w = kCropWidth;
        for (const auto& l : layers) {
            const auto e = l.output_extent(h, w);
            h = e[0];
            w = e[1];
        }
        require(h == n_range && w == 1, ErrorKind::ShapeMismatch, "student: composed output is not [1, n_range, 1]");
    }
};

/// Five stages collapsing azimuth 30 -> 15 -> 8 -> 4 -> 1 -> 1 while keeping
/// every range bin. Weights use seeded uniform fan-in initialisation.
inline StudentModel default_architecture(std::uint64_t seed = 1234, std::size_t n_azimuth = 256) {
    using A = Activation;
    StudentModel m{{
        Conv2dLayer::zeros(8, 3, 5, 5, {1, 2}, {2, 2}, A::Relu),
        Conv2dLayer::zeros(16, 8, 3, 5, {1, 2}, {1, 2}, A::Relu),
        Conv2dLayer::zeros(16, 16, 3, 4, {1, 2}, {1, 1}, A::Relu),
        Conv2dLayer::zeros(16, 16, 3, 4, {1, 1}, {1, 0}, A::Relu),
        Conv2dLayer::zeros(1, 16, 3, 1, {1, 1}, {1, 0}, A::Sigmoid),
    }, centered_crop_offset(n_azimuth)};
    Rng rng(seed);
    for (auto& l : m.layers) init_layer(l, rng);
    return m;
}

/// Inputs and outputs of every stage, kept for the backward pass.
struct StudentTrace {
    std::array<Tensor, kStudentStages + 1> activations; // [0] is the network input
};

inline StudentTrace student_forward_trace(const Tensor& input, const StudentModel& model) {
    require(input.rank() == 3 && input.dim(0) == 3 && input.dim(2) == kCropWidth, ErrorKind::ShapeMismatch,
            "student_forward: input must be [3, n_range, 30], got " + shape_str(input.shape()));
    StudentTrace t;
    t.activations[0] = input;
    for (std::size_t i = 0; i < kStudentStages; ++i)
        t.activations[i + 1] = conv2d_forward(t.activations[i], model.layers[i]);
    return t;
}

/// Per-range-bin probabilities in (0, 1).
inline std::vector<float> student_forward(const Tensor& input, const StudentModel& model) {
    const Tensor* x = &input;
    require(input.rank() == 3 && input.dim(0) == 3 && input.dim(2) == kCropWidth, ErrorKind::ShapeMismatch,
            "student_forward: input must be [3, n_range, 30], got " + shape_str(input.shape()));
    Tensor cur;
    for (const auto& layer : model.layers) {
        cur = conv2d_forward(*x, layer);
        x = &cur;
    }
    require(cur.dim(0) == 1 && cur.dim(1) == input.dim(1) && cur.dim(2) == 1, ErrorKind::ShapeMismatch,
            "student_forward: output is not [1, n_range, 1]");
    return {cur.values().begin(), cur.values().end()};
}

inline std::vector<float> student_predict(const Tensor& map, const StudentModel& model) {
    return student_forward(make_student_input(map, model.crop_offset), model);
}

/// Parameter gradients (kernel, bias per stage, same order as parameters()).
inline std::vector<Tensor> student_backward(const StudentTrace& trace, const StudentModel& model,
                                            std::span<const float> grad_probs) {
    const Tensor& out = trace.activations.back();
    require(grad_probs.size() == out.size(), ErrorKind::ShapeMismatch, "student_backward: gradient length");
    Tensor grad(out.shape(), std::vector<float>(grad_probs.begin(), grad_probs.end()));
    std::vector<Tensor> grads(2 * kStudentStages);
    for (std::size_t i = kStudentStages; i-- > 0;) {
        auto g = conv2d_backward(trace.activations[i], model.layers[i], trace.activations[i + 1], grad, i > 0);
        grads[2 * i] = std::move(g.kernel);
        grads[2 * i + 1] = std::move(g.bias);
        if (i > 0) grad = std::move(g.input);
    }
    return grads;
}

} // namespace radkd
