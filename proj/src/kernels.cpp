#include "datlab/kernels.hpp"

#include <cstdlib>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace datlab::kern {

namespace {

Backend g_backend = [] {
#ifdef _OPENMP
    Backend b = Backend::openmp;
#else
    Backend b = Backend::serial;
#endif
    if (const char* env = std::getenv("DATLAB_KERNELS")) {
        if (std::strcmp(env, "serial") == 0) b = Backend::serial;
        if (std::strcmp(env, "openmp") == 0) b = Backend::openmp;
    }
    return b;
}();

// One row of C = A * B. Shared by both backends so per-element operation
// order is identical whichever backend runs it.
inline void matmul_row(const double* __restrict arow, const double* __restrict B,
                       double* __restrict crow, int k, int n) {
    for (int j = 0; j < n; ++j) crow[j] = 0.0;
    for (int p = 0; p < k; ++p) {
        const double av = arow[p];
        const double* __restrict brow = B + static_cast<size_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

inline void transpose_row(const Mat& A, Mat& out, int i) {
    const double* src = A.row(i);
    for (int j = 0; j < A.cols; ++j) out(j, i) = src[j];
}

}  // namespace

Backend backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

void matmul_serial(const Mat& A, const Mat& B, Mat& C) {
    assert(A.cols == B.rows);
    C.rows = A.rows;
    C.cols = B.cols;
    C.a.resize(static_cast<size_t>(C.rows) * C.cols);
    for (int i = 0; i < A.rows; ++i)
        matmul_row(A.row(i), B.a.data(), C.row(i), A.cols, B.cols);
}

void matmul_openmp(const Mat& A, const Mat& B, Mat& C) {
    assert(A.cols == B.rows);
    C.rows = A.rows;
    C.cols = B.cols;
    C.a.resize(static_cast<size_t>(C.rows) * C.cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < A.rows; ++i)
        matmul_row(A.row(i), B.a.data(), C.row(i), A.cols, B.cols);
}

void matmul(const Mat& A, const Mat& B, Mat& C) {
    if (g_backend == Backend::openmp)
        matmul_openmp(A, B, C);
    else
        matmul_serial(A, B, C);
}

void transpose_serial(const Mat& A, Mat& out) {
    out.rows = A.cols;
    out.cols = A.rows;
    out.a.resize(A.a.size());
    for (int i = 0; i < A.rows; ++i) transpose_row(A, out, i);
}

void transpose_openmp(const Mat& A, Mat& out) {
    out.rows = A.cols;
    out.cols = A.rows;
    out.a.resize(A.a.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < A.rows; ++i) transpose_row(A, out, i);
}

void transpose(const Mat& A, Mat& out) {
    if (g_backend == Backend::openmp)
        transpose_openmp(A, out);
    else
        transpose_serial(A, out);
}

namespace detail {

void parallel_rows(int rows, void* ctx, void (*body)(void*, int)) {
    if (g_backend == Backend::openmp) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < rows; ++i) body(ctx, i);
    } else {
        for (int i = 0; i < rows; ++i) body(ctx, i);
    }
}

}  // namespace detail

double sum_all(const Mat& A) {
    double s = 0.0;
    for (double v : A.a) s += v;
    return s;
}

void row_sum(const Mat& A, Mat& out) {
    out.rows = A.rows;
    out.cols = 1;
    out.a.resize(A.rows);
    for (int i = 0; i < A.rows; ++i) {
        const double* src = A.row(i);
        double s = 0.0;
        for (int j = 0; j < A.cols; ++j) s += src[j];
        out.a[i] = s;
    }
}

void col_sum(const Mat& A, Mat& out) {
    out.rows = 1;
    out.cols = A.cols;
    out.a.assign(A.cols, 0.0);
    for (int i = 0; i < A.rows; ++i) {
        const double* src = A.row(i);
        for (int j = 0; j < A.cols; ++j) out.a[j] += src[j];
    }
}

void bcast_all(double v, int rows, int cols, Mat& out) {
    out.rows = rows;
    out.cols = cols;
    out.a.assign(static_cast<size_t>(rows) * cols, v);
}

void bcast_col(const Mat& colvec, int cols, Mat& out) {
    assert(colvec.cols == 1);
    out.rows = colvec.rows;
    out.cols = cols;
    out.a.resize(static_cast<size_t>(out.rows) * cols);
    for (int i = 0; i < out.rows; ++i) {
        double v = colvec.a[i];
        double* dst = out.row(i);
        for (int j = 0; j < cols; ++j) dst[j] = v;
    }
}

void bcast_row(const Mat& rowvec, int rows, Mat& out) {
    assert(rowvec.rows == 1);
    out.rows = rows;
    out.cols = rowvec.cols;
    out.a.resize(static_cast<size_t>(rows) * out.cols);
    for (int i = 0; i < rows; ++i) {
        double* dst = out.row(i);
        for (int j = 0; j < out.cols; ++j) dst[j] = rowvec.a[j];
    }
}

}  // namespace datlab::kern
