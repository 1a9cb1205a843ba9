#pragma once

#include "datlab/mat.hpp"

namespace datlab::kern {

enum class Backend { serial, openmp };

// Process-wide kernel backend. Defaults to openmp when compiled with OpenMP,
// overridable via DATLAB_KERNELS=serial|openmp. Both backends produce
// bit-identical results: they share the same per-row kernels, so each output
// element sees the same sequence of floating-point operations.
Backend backend();
void set_backend(Backend b);

// C = A * B
void matmul(const Mat& A, const Mat& B, Mat& C);
void matmul_serial(const Mat& A, const Mat& B, Mat& C);
void matmul_openmp(const Mat& A, const Mat& B, Mat& C);

void transpose(const Mat& A, Mat& out);
void transpose_serial(const Mat& A, Mat& out);
void transpose_openmp(const Mat& A, Mat& out);

// out[i][j] = f(A[i][j])
template <typename F>
void map1(const Mat& A, Mat& out, F f);
// out[i][j] = f(A[i][j], B[i][j])
template <typename F>
void map2(const Mat& A, const Mat& B, Mat& out, F f);

// Reductions accumulate in fixed row-major order regardless of backend.
double sum_all(const Mat& A);
void row_sum(const Mat& A, Mat& out);  // rows x 1
void col_sum(const Mat& A, Mat& out);  // 1 x cols

// broadcast helpers
void bcast_all(double v, int rows, int cols, Mat& out);
void bcast_col(const Mat& colvec, int cols, Mat& out);   // rows x 1 -> rows x cols
void bcast_row(const Mat& rowvec, int rows, Mat& out);   // 1 x cols -> rows x cols

namespace detail {
void parallel_rows(int rows, void* ctx, void (*body)(void*, int));
}

template <typename F>
void map1(const Mat& A, Mat& out, F f) {
    out.rows = A.rows;
    out.cols = A.cols;
    out.a.resize(A.a.size());
    struct Ctx {
        const Mat* A;
        Mat* out;
        F* f;
    } ctx{&A, &out, &f};
    detail::parallel_rows(A.rows, &ctx, [](void* p, int i) {
        auto* c = static_cast<Ctx*>(p);
        const double* src = c->A->row(i);
        double* dst = c->out->row(i);
        for (int j = 0; j < c->A->cols; ++j) dst[j] = (*c->f)(src[j]);
    });
}

template <typename F>
void map2(const Mat& A, const Mat& B, Mat& out, F f) {
    assert(A.same_shape(B));
    out.rows = A.rows;
    out.cols = A.cols;
    out.a.resize(A.a.size());
    struct Ctx {
        const Mat* A;
        const Mat* B;
        Mat* out;
        F* f;
    } ctx{&A, &B, &out, &f};
    detail::parallel_rows(A.rows, &ctx, [](void* p, int i) {
        auto* c = static_cast<Ctx*>(p);
        const double* x = c->A->row(i);
        const double* y = c->B->row(i);
        double* dst = c->out->row(i);
        for (int j = 0; j < c->A->cols; ++j) dst[j] = (*c->f)(x[j], y[j]);
    });
}

}  // namespace datlab::kern
