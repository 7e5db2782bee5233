// SPDX-License-Identifier: Apache-2.0
//
// Flat row-major double tensor used by the network kernel.

#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace beamtrack {

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
        data_.assign(numel_of(shape_), 0.0);
    }

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != numel_of(shape_))
            throw std::invalid_argument("Tensor: data length does not match shape");
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(0.0); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void check_finite(const char* context) const {
        for (double v : data_)
            if (!std::isfinite(v))
                throw std::runtime_error(std::string("non-finite value in ") + context);
    }

    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (d == 0) throw std::invalid_argument("Tensor: zero dimension");
            n *= d;
        }
        return n;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace beamtrack
