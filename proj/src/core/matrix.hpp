#pragma once
// Minimal dense row-major matrix and vector kernels, double precision.
// Dimensions stay small (d <= a few hundred), so plain loops are enough.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "core/rng.hpp"

namespace septa {

using Vec = std::vector<double>;

struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(size_t i) { return data.data() + i * cols; }
    const double* row(size_t i) const { return data.data() + i * cols; }
    double& at(size_t i, size_t j) { return data[i * cols + j]; }
    double at(size_t i, size_t j) const { return data[i * cols + j]; }

    bool empty() const { return data.empty(); }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    static Matrix uniform_init(size_t r, size_t c, size_t fan_in, Rng& rng) {
        Matrix m(r, c);
        const double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 1.0;
        for (auto& v : m.data) v = rng.uniform(-bound, bound);
        return m;
    }
};

// y = M x
inline Vec matvec(const Matrix& m, const Vec& x) {
    if (x.size() != m.cols) throw std::invalid_argument("matvec: dimension mismatch");
    Vec y(m.rows, 0.0);
    for (size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        double acc = 0.0;
        for (size_t j = 0; j < m.cols; ++j) acc += r[j] * x[j];
        y[i] = acc;
    }
    return y;
}

// y = M^T x
inline Vec matvec_transposed(const Matrix& m, const Vec& x) {
    if (x.size() != m.rows) throw std::invalid_argument("matvec_transposed: dimension mismatch");
    Vec y(m.cols, 0.0);
    for (size_t i = 0; i < m.rows; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* r = m.row(i);
        for (size_t j = 0; j < m.cols; ++j) y[j] += xi * r[j];
    }
    return y;
}

// M += a b^T
inline void add_outer(Matrix& m, const Vec& a, const Vec& b) {
    if (a.size() != m.rows || b.size() != m.cols)
        throw std::invalid_argument("add_outer: dimension mismatch");
    for (size_t i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        const double ai = a[i];
        if (ai == 0.0) continue;
        for (size_t j = 0; j < m.cols; ++j) r[j] += ai * b[j];
    }
}

inline void axpy(Vec& y, double a, const Vec& x) {
    for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline double dot(const Vec& a, const Vec& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

inline void scale(Vec& v, double a) {
    for (auto& x : v) x *= a;
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Matrix& m) {
    for (double x : m.data)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace septa
