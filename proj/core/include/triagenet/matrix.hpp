#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "triagenet/errors.hpp"

namespace triagenet {

/// Dense row-major matrix of doubles. Just enough linear algebra for the
/// network and the pipeline; kernels keep a fixed summation order so results
/// are bit-reproducible.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return v_.empty(); }

    double& at(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {v_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {v_.data() + i * cols_, cols_}; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

/// C = A(m x k) * B(k x n).
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ValidationError("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k;
        double* crow = c.data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = b.data() + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

/// C = A^T(k x m) * B(m x n); A given as (m x k). Used for weight gradients.
inline Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ValidationError("matmul_transpose_a: row counts differ");
    Matrix c(a.cols(), b.cols());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k;
        const double* brow = b.data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            double* crow = c.data() + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

/// C = A(m x n) * B^T(n x k); B given as (k x n). Used for input gradients.
inline Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ValidationError("matmul_transpose_b: column counts differ");
    Matrix c(a.rows(), b.rows());
    const std::size_t m = a.rows(), n = a.cols(), k = b.rows();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * n;
        double* crow = c.data() + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double* brow = b.data() + kk * n;
            double s = 0;
            for (std::size_t j = 0; j < n; ++j) s += arow[j] * brow[j];
            crow[kk] = s;
        }
    }
    return c;
}

} // namespace triagenet
