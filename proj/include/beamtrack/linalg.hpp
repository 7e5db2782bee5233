// SPDX-License-Identifier: Apache-2.0
//
// Dense complex vectors and matrices for narrowband MIMO math.
// Double precision throughout, row-major storage, dimensions fixed at
// construction. Operations validate conformability and throw
// std::invalid_argument on mismatch.

#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace beamtrack {

using cxd = std::complex<double>;
using CVec = std::vector<cxd>;

class CMat {
public:
    CMat() = default;

    CMat(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols) {
        if (rows == 0 || cols == 0)
            throw std::invalid_argument("CMat: dimensions must be positive");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    cxd& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cxd& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    cxd* data() { return data_.data(); }
    const cxd* data() const { return data_.data(); }
    std::size_t size() const { return data_.size(); }

    CMat& operator+=(const CMat& other) {
        require_same_shape(other, "operator+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    CMat& operator*=(cxd s) {
        for (auto& v : data_) v *= s;
        return *this;
    }

    friend CMat operator+(CMat a, const CMat& b) { return a += b; }

    friend CMat operator*(cxd s, CMat a) { return a *= s; }

    friend bool operator==(const CMat& a, const CMat& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

    // y = A x
    CVec apply(const CVec& x) const {
        if (x.size() != cols_)
            throw std::invalid_argument("CMat::apply: vector length " + std::to_string(x.size()) +
                                        " does not match " + std::to_string(cols_) + " columns");
        CVec y(rows_, cxd{0.0, 0.0});
        for (std::size_t r = 0; r < rows_; ++r) {
            cxd acc{0.0, 0.0};
            const cxd* row = data_.data() + r * cols_;
            for (std::size_t c = 0; c < cols_; ++c) acc += row[c] * x[c];
            y[r] = acc;
        }
        return y;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const auto& v : data_) s += std::norm(v);
        return std::sqrt(s);
    }

private:
    void require_same_shape(const CMat& other, const char* op) const {
        if (rows_ != other.rows_ || cols_ != other.cols_)
            throw std::invalid_argument(std::string("CMat::") + op + ": shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cxd> data_;
};

// <a, b> = sum conj(a_i) b_i
inline cxd inner(const CVec& a, const CVec& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("inner: length mismatch");
    cxd acc{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
    return acc;
}

inline double norm2(const CVec& a) {
    double s = 0.0;
    for (const auto& v : a) s += std::norm(v);
    return std::sqrt(s);
}

// A += g * u v^H
inline void add_scaled_outer(CMat& a, cxd g, const CVec& u, const CVec& v) {
    if (u.size() != a.rows() || v.size() != a.cols())
        throw std::invalid_argument("add_scaled_outer: shape mismatch");
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const cxd gu = g * u[r];
        for (std::size_t c = 0; c < a.cols(); ++c) a(r, c) += gu * std::conj(v[c]);
    }
}

}  // namespace beamtrack
