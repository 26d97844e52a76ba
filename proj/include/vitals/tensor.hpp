#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "vitals/error.hpp"

namespace vitals {

// Dense N-dimensional array, row-major, double precision. This is the carrier
// for all model math; layout helpers live with the code that uses them.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::vector<std::size_t> shape, double fill)
        : shape_(std::move(shape)) {
        validate_shape(shape_);
        data_.assign(element_count(shape_), fill);
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape), 0.0); }

    static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data) {
        validate_shape(shape);
        require(element_count(shape) == data.size(), ErrorKind::Dimension,
                "data length does not match shape");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = std::move(data);
        return t;
    }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    Tensor reshape(std::vector<std::size_t> new_shape) const {
        validate_shape(new_shape);
        require(element_count(new_shape) == data_.size(), ErrorKind::Dimension,
                "reshape must preserve element count");
        Tensor t;
        t.shape_ = std::move(new_shape);
        t.data_ = data_;
        return t;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { data_.assign(data_.size(), v); }

    std::string shape_string() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

private:
    static void validate_shape(const std::vector<std::size_t>& shape) {
        require(!shape.empty(), ErrorKind::Dimension, "shape must not be empty");
        for (std::size_t d : shape)
            require(d > 0, ErrorKind::Dimension, "shape dimensions must be positive");
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline Tensor tensor_new(const std::vector<std::size_t>& shape, double fill) {
    return Tensor(shape, fill);
}

// Basic per-list statistics shared by preprocessing and metrics. Population
// (biased) variance throughout; the diff-normalization tests pin that choice.
inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double population_std(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

} // namespace vitals
