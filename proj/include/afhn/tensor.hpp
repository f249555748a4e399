#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "afhn/errors.hpp"

namespace afhn {

// Dense row-major 2-D array of doubles. Vectors are 1xN rows.
class Tensor {
  public:
    Tensor() = default;

    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.data_[0] = v;
        return t;
    }

    static Tensor row(std::vector<double> v) {
        Tensor t;
        t.rows_ = 1;
        t.cols_ = v.size();
        t.data_ = std::move(v);
        return t;
    }

    static Tensor row(std::initializer_list<double> v) {
        return row(std::vector<double>(v));
    }

    static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> v) {
        if (v.size() != rows * cols) {
            throw DimensionError("tensor data length " + std::to_string(v.size()) +
                                 " != " + std::to_string(rows) + "x" + std::to_string(cols));
        }
        Tensor t;
        t.rows_ = rows;
        t.cols_ = cols;
        t.data_ = std::move(v);
        return t;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& vec() const { return data_; }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool is_scalar() const { return data_.size() == 1; }

    double item() const {
        if (!is_scalar()) throw DimensionError("item() on non-scalar tensor");
        return data_[0];
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    // Row r as a copy (1 x cols).
    Tensor row_copy(std::size_t r) const {
        Tensor t(1, cols_);
        for (std::size_t c = 0; c < cols_; ++c) t[c] = at(r, c);
        return t;
    }

    bool operator==(const Tensor& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// C = A * B with the cache-friendly ikj order.
inline void matmul_into(const Tensor& a, const Tensor& b, Tensor& c) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul " + a.shape_str() + " x " + b.shape_str());
    }
    c = Tensor(a.rows(), b.cols());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k;
        double* crow = c.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor c;
    matmul_into(a, b, c);
    return c;
}

inline Tensor transpose(const Tensor& a) {
    Tensor t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

inline double dot(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) throw DimensionError("dot length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

}  // namespace afhn
