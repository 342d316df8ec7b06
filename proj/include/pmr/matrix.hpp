#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmr {

// Dense row-major matrix of doubles. Compute precision is 64-bit
// throughout; file storage converts to f32 at the container boundary.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> d)
        : rows(r), cols(c), data(std::move(d)) {
        if (data.size() != rows * cols)
            throw std::invalid_argument("Matrix: data size does not match shape");
    }

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::size_t size() const { return data.size(); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline void check_shape(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    check_shape(a.cols == b.rows, "matmul " + std::to_string(a.cols) + " vs " + std::to_string(b.rows));
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j)
                c.at(i, j) += aik * b.at(k, j);
        }
    return c;
}

// a * b^T without materializing the transpose.
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    check_shape(a.cols == b.cols, "matmul_bt inner dims");
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(j, k);
            c.at(i, j) = s;
        }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

// Numerically stable softmax applied to each row independently.
inline Matrix row_softmax(const Matrix& x) {
    Matrix y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double mx = x.at(i, 0);
        for (std::size_t j = 1; j < x.cols; ++j) mx = std::max(mx, x.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double e = std::exp(x.at(i, j) - mx);
            y.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < x.cols; ++j) y.at(i, j) /= sum;
    }
    return y;
}

inline double l2_norm(const Matrix& v) {
    double s = 0.0;
    for (double d : v.data) s += d * d;
    return std::sqrt(s);
}

inline Matrix mean_pool_rows(const Matrix& x) {
    check_shape(x.rows >= 1, "mean_pool_rows on empty matrix");
    Matrix y(1, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) y.at(0, j) += x.at(i, j);
    for (std::size_t j = 0; j < x.cols; ++j) y.at(0, j) /= static_cast<double>(x.rows);
    return y;
}

inline double cosine_similarity(const Matrix& a, const Matrix& b) {
    check_shape(a.size() == b.size(), "cosine_similarity lengths");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        ab += a.data[i] * b.data[i];
        aa += a.data[i] * a.data[i];
        bb += b.data[i] * b.data[i];
    }
    if (aa == 0.0 || bb == 0.0)
        throw std::invalid_argument("cosine_similarity: zero-norm vector");
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

inline Matrix relu(const Matrix& x) {
    Matrix y = x;
    for (double& d : y.data) d = d > 0.0 ? d : 0.0;
    return y;
}

inline Matrix sigmoid(const Matrix& x) {
    Matrix y = x;
    for (double& d : y.data) d = 1.0 / (1.0 + std::exp(-d));
    return y;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    check_shape(a.same_shape(b), "add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

inline bool all_finite(const Matrix& m) {
    for (double d : m.data)
        if (!std::isfinite(d)) return false;
    return true;
}

}  // namespace pmr
