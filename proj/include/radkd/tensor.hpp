#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "radkd/error.hpp"

namespace radkd {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

/// Dense row-major float32 array of rank 1..4.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, float fill = 0.0f)
        : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
        check_rank();
    }

    Tensor(Shape shape, std::vector<float> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        check_rank();
        require(data_.size() == shape_size(shape_), ErrorKind::ShapeMismatch,
                "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                    shape_str(shape_));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float* data() noexcept { return data_.data(); }
    const float* data() const noexcept { return data_.data(); }
    std::span<float> values() noexcept { return data_; }
    std::span<const float> values() const noexcept { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    float& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    float at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    float& at(std::size_t c, std::size_t i, std::size_t j) {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }
    float at(std::size_t c, std::size_t i, std::size_t j) const {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    void check_rank() const {
        require(!shape_.empty() && shape_.size() <= 4, ErrorKind::ShapeMismatch,
                "tensor rank must be 1..4, got " + std::to_string(shape_.size()));
    }

    Shape shape_;
    std::vector<float> data_;
};

inline void require_shape(const Tensor& t, const Shape& expected, const char* what) {
    require(t.shape() == expected, ErrorKind::ShapeMismatch,
            std::string(what) + ": expected " + shape_str(expected) + ", got " + shape_str(t.shape()));
}

inline void require_finite(const Tensor& t, const char* what) {
    require(t.all_finite(), ErrorKind::NonFinite, std::string(what) + " produced a non-finite value");
}

} // namespace radkd
