#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "datlab/losses.hpp"
#include "datlab/mat.hpp"
#include "datlab/network.hpp"

namespace datlab {

struct AttackConfig {
    double tau = 0.02;    // success threshold on |D(x) - target|
    double alpha = 0.1;   // step size
    int max_iters = 200;

    void check() const;
};

struct AttackResult {
    bool success = false;
    int iterations = 0;  // executed steps; max_iters when unsuccessful
    Mat x_final;
};

// Targeted raw-gradient descent on |D(x) - opposite_mean| until within tau.
AttackResult attack_sample(const MlpNetwork& D, const Mat& x, double opposite_mean,
                           const AttackConfig& cfg);

struct AttackReport {
    // mean iterations over successful attacks only; absent when none succeed
    std::optional<double> kbar_real, kbar_fake;
    double success_rate_real = 0.0, success_rate_fake = 0.0;
    AttackConfig cfg;
};

// Attacks every fake row toward mean D(real) and every real row toward
// mean D(fake).
AttackReport attack_statistics(const MlpNetwork& D, const Mat& real, const Mat& fake,
                               const AttackConfig& cfg);

// Largest singular value by power iteration with a seeded start vector.
double spectral_norm(const Mat& W, int iters = 1000, double tol = 1e-10,
                     uint64_t seed = 0x5eedULL);

// Product of layer spectral norms (all supported activations are 1-Lipschitz).
double lipschitz_upper_bound(const MlpNetwork& net);

// Max |f(x)-f(y)| / ||x-y|| over pair_budget random distinct sample pairs;
// a lower bound on the true constant by construction.
double empirical_lipschitz(const MlpNetwork& D, const Mat& samples, int pair_budget,
                           uint64_t seed);

struct LipschitzEstimate {
    double spectral_bound = 0.0;
    double empirical_sup = 0.0;
    double grad_norm_mean = 0.0;
    double grad_norm_max = 0.0;
};

LipschitzEstimate estimate_lipschitz(const MlpNetwork& D, const Mat& samples, int pair_budget,
                                     uint64_t seed);

// Mean per-row cosine between the generator's one-sgd-step image change and
// the fake-side perturbation: +1 means both push fake samples the same way,
// toward what the discriminator scores as real. Rows with a zero norm are
// excluded, and the value is absent when nothing remains.
std::optional<double> perturbation_alignment(const MlpNetwork& G, const MlpNetwork& D,
                                             const Mat& z, const Mat& x_r, LossKind loss,
                                             double sgd_lr, double eps);

}  // namespace datlab
