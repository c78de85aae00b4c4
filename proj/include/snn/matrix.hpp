#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <vector>

namespace snn {

// Dense row-major matrix of doubles. Deliberately minimal: the hot loops in
// this project are custom per-timestep scans, not BLAS-shaped products.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
    double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }

    std::size_t size() const { return a.size(); }
    bool empty() const { return a.empty(); }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// Fixed binary connectivity map. 1 = connection present.
struct MaskMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> a;

    MaskMatrix() = default;
    MaskMatrix(int r, int c, std::uint8_t fill = 1)
        : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

    std::uint8_t& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    std::uint8_t operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

    bool empty() const { return a.empty(); }
    std::size_t count_ones() const {
        std::size_t n = 0;
        for (auto b : a) n += b;
        return n;
    }
};

inline double dot(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(const std::vector<double>& x) { return std::sqrt(dot(x, x)); }

// Cosine similarity of two flattened gradient vectors. Returns 0 when either
// vector is identically zero (no direction to compare).
inline double cosine(const std::vector<double>& x, const std::vector<double>& y) {
    const double nx = norm2(x);
    const double ny = norm2(y);
    if (nx == 0.0 || ny == 0.0) return 0.0;
    return dot(x, y) / (nx * ny);
}

}  // namespace snn
