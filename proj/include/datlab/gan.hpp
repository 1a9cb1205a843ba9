#pragma once

#include <cstdint>

#include "datlab/losses.hpp"
#include "datlab/mat.hpp"
#include "datlab/network.hpp"
#include "datlab/optim.hpp"

namespace datlab {

struct TrainConfig {
    int batch_size = 64;
    int n_dis = 1;
    long long n_iter = 10000;
    int latent_dim = 16;
    uint64_t seed = 1;
    LossKind loss = LossKind::vanilla;
    OptimKind opt_g, opt_d;
};

// One step's worth of data: real samples, latent draws, generated samples.
struct Batch {
    Mat x_r, z, x_f;
};

struct StepMetrics {
    double d_loss_clean = 0.0;
    double d_loss_adv = 0.0;
    double g_loss = 0.0;
    double delta_norm_sum = 0.0;  // summed perturbation row norms this step
    long long delta_rows = 0;     // rows those norms cover
    double sign_frac_real = 0.0;  // fraction with g1(D(x_r)) above the fake-side mean
    double sign_frac_fake = 0.0;  // fraction with g2(D(x_f)) above the real-side mean
    double penalty = 0.0;
};

// Fraction of rows of g(D(x)) strictly above a frozen opposite-side mean.
double sign_case_fraction(const Mat& y_own, LossKind loss, GSide side, double opposite_mean);
// mean of g(D(x)) over a batch of critic outputs
double g_mean(const Mat& y, LossKind loss, GSide side);

// Ascends mean[g1(D(x_r))] + mean[g2(D(x_f))]; x_f is constant data here.
StepMetrics discriminator_step_clean(MlpNetwork& D, const Batch& batch, LossKind loss,
                                     Optimizer& opt, long long iteration);

// Descends the fake-side term with respect to generator parameters only.
StepMetrics generator_step(MlpNetwork& G, const MlpNetwork& D, const Mat& z, LossKind loss,
                           Optimizer& opt, long long iteration);

}  // namespace datlab
