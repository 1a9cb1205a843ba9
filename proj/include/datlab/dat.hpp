#pragma once

#include <optional>
#include <vector>

#include "datlab/gan.hpp"
#include "datlab/losses.hpp"
#include "datlab/mat.hpp"
#include "datlab/network.hpp"
#include "datlab/optim.hpp"

namespace datlab {

struct PerturbConfig {
    bool enabled = false;
    enum class Mode { dat, datt };
    Mode mode = Mode::dat;
    double epsilon = 1.0;
    int steps = 1;
    // perturbation positions: real inputs (i), fake inputs (ii) during the
    // discriminator update, fake inputs during the generator update (iii)
    bool pos_real = true;
    bool pos_fake = true;
    bool pos_gen = false;
};

struct Perturbation {
    Mat delta;
};

// Test instrumentation: counts how often an opposite-batch target mean is
// evaluated (it must be frozen, i.e. read once per perturbation) and records
// the inputs the discriminator ascent objective actually saw.
struct StepObserver {
    long long target_mean_evals = 0;
    std::vector<Mat> d_inputs;
};

// delta(x) = -eps * grad_x |g_side(D(x)) - target|, target frozen at the
// opposite batch's mean of the same transform. Rows at exact equality get a
// zero subgradient.
Perturbation perturb_real(const Mat& x_r, const Mat& x_f, const MlpNetwork& D, LossKind loss,
                          double eps, StepObserver* obs = nullptr);
Perturbation perturb_fake(const Mat& x_f, const Mat& x_r, const MlpNetwork& D, LossKind loss,
                          double eps, StepObserver* obs = nullptr);

// k applications of the one-step rule at size eps/k, re-evaluating the
// gradient at each intermediate point; the target mean stays frozen at its
// original value. No clipping.
Perturbation perturb_multi(const Mat& x, const Mat& other, const MlpNetwork& D, LossKind loss,
                           double eps, int k, GSide side, StepObserver* obs = nullptr);

StepMetrics discriminator_step_dat(MlpNetwork& D, const Batch& batch, LossKind loss,
                                   const PerturbConfig& pcfg, Optimizer& opt,
                                   long long iteration, StepObserver* obs = nullptr);

// Ascends the equal-weight average of the clean and perturbed objectives.
StepMetrics discriminator_step_datt(MlpNetwork& D, const Batch& batch, LossKind loss,
                                    const PerturbConfig& pcfg, Optimizer& opt,
                                    long long iteration, StepObserver* obs = nullptr);

// Position (iii): the generator descends with x_f + delta_f, the perturbation
// frozen against the given real batch. With the position disabled or eps = 0
// this is generator_step bit for bit.
StepMetrics generator_step_dat(MlpNetwork& G, const MlpNetwork& D, const Mat& z, const Mat& x_r,
                               LossKind loss, const PerturbConfig& pcfg, Optimizer& opt,
                               long long iteration, StepObserver* obs = nullptr);

struct TaylorCheck {
    double lhs = 0.0;         // mean g(D(x + delta))
    double rhs = 0.0;         // mean g(D(x)) + first_order
    double first_order = 0.0; // mean over rows of grad_x g(D(x)) · delta
    double residual = 0.0;    // |lhs - rhs|
};

// First-order expansion quality of the perturbed loss. The perturbation
// target defaults to the same batch's frozen mean; pass `target` to pin it.
TaylorCheck taylor_check(const MlpNetwork& D, const Mat& x, LossKind loss, GSide side, double eps,
                         std::optional<double> target = std::nullopt);

}  // namespace datlab
