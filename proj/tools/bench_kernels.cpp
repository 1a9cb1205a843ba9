// Times the serial reference kernels against the OpenMP ones and checks that
// both produce bit-identical output.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "datlab/kernels.hpp"
#include "datlab/mat.hpp"
#include "datlab/rng.hpp"

using namespace datlab;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
    Mat m(r, c);
    for (double& v : m.a) v = rng.normal();
    return m;
}

template <typename F>
double best_of(int reps, F&& f) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        best = std::min(best, dt);
    }
    return best;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("openmp disabled at build time; both columns run serial code\n");
#endif

    Rng rng(42);
    bool all_same = true;

    std::printf("\n%-28s %12s %12s %9s %8s  %s\n", "kernel", "serial ms", "openmp ms", "GF/s(omp)",
                "speedup", "outputs");
    struct Dims {
        int m, k, n;
    };
    for (const Dims d : {Dims{64, 64, 64}, Dims{256, 256, 256}, Dims{512, 512, 512}}) {
        const Mat A = random_mat(d.m, d.k, rng);
        const Mat B = random_mat(d.k, d.n, rng);
        Mat C1(d.m, d.n), C2(d.m, d.n);
        const double ts = best_of(5, [&] { kern::matmul_serial(A, B, C1); });
        const double tp = best_of(5, [&] { kern::matmul_openmp(A, B, C2); });
        const bool same = bit_equal(C1, C2);
        all_same = all_same && same;
        const double gf = 2.0 * d.m * d.k * d.n / tp * 1e-9;
        char name[64];
        std::snprintf(name, sizeof name, "matmul %dx%dx%d", d.m, d.k, d.n);
        std::printf("%-28s %12.3f %12.3f %9.2f %8.2fx  %s\n", name, ts * 1e3, tp * 1e3, gf,
                    ts / tp, same ? "bit-identical" : "MISMATCH");
    }

    {
        const Mat A = random_mat(4096, 256, rng);
        Mat O1, O2;
        const auto f = [](double x) { return std::tanh(x); };
        const kern::Backend saved = kern::backend();
        kern::set_backend(kern::Backend::serial);
        const double ts = best_of(5, [&] { kern::map1(A, O1, f); });
        kern::set_backend(kern::Backend::openmp);
        const double tp = best_of(5, [&] { kern::map1(A, O2, f); });
        kern::set_backend(saved);
        const bool same = bit_equal(O1, O2);
        all_same = all_same && same;
        std::printf("%-28s %12.3f %12.3f %9s %8.2fx  %s\n", "map tanh 4096x256", ts * 1e3,
                    tp * 1e3, "-", ts / tp, same ? "bit-identical" : "MISMATCH");
    }

    if (!all_same) {
        std::printf("\nbackend outputs diverged\n");
        return 1;
    }
    return 0;
}
