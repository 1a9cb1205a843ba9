#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace datlab {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 matrices.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {
        assert(r >= 0 && c >= 0);
    }
    Mat(int r, int c, std::vector<double> data) : rows(r), cols(c), a(std::move(data)) {
        assert(a.size() == static_cast<size_t>(r) * c);
    }

    static Mat zeros(int r, int c) { return Mat(r, c); }
    static Mat filled(int r, int c, double v) {
        Mat m(r, c);
        for (double& x : m.a) x = v;
        return m;
    }

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

    size_t size() const { return a.size(); }
    bool empty() const { return a.empty(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline bool all_finite(const Mat& m) {
    for (double v : m.a)
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool bit_equal(const Mat& x, const Mat& y) {
    if (!x.same_shape(y)) return false;
    for (size_t i = 0; i < x.a.size(); ++i)
        if (x.a[i] != y.a[i] || std::signbit(x.a[i]) != std::signbit(y.a[i])) return false;
    return true;
}

inline double row_norm(const Mat& m, int i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m(i, j) * m(i, j);
    return std::sqrt(s);
}

}  // namespace datlab
