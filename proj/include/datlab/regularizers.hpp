#pragma once

#include <string>

#include "datlab/autodiff.hpp"
#include "datlab/gan.hpp"
#include "datlab/mat.hpp"
#include "datlab/network.hpp"
#include "datlab/optim.hpp"
#include "datlab/rng.hpp"
#include "datlab/tape.hpp"

namespace datlab {

enum class RegTag { none, gp, lp, zero_gp };

struct RegKind {
    RegTag tag = RegTag::none;
    double lambda = 0.0;
};

double default_lambda(RegTag tag);
std::string reg_name(RegTag tag);
RegTag reg_from_name(const std::string& s);

// Per-row interpolates t·x_r + (1-t)·x_f, fresh t ~ U[0,1] per row.
Mat draw_interpolates(const Mat& x_r, const Mat& x_f, Rng& rng);

// Penalty subgraphs on an existing tape, sharing the discriminator's
// parameter leaves so one backward pass covers objective + penalty.
// Each returns a 1x1 node already scaled by lambda.
int gp_penalty_node(Tape& t, const MlpNetwork& D, const std::vector<ParamNodes>& pn,
                    const Mat& x_hat, double lambda);
int lp_penalty_node(Tape& t, const MlpNetwork& D, const std::vector<ParamNodes>& pn,
                    const Mat& x_hat, double lambda);
int zero_gp_penalty_node(Tape& t, const MlpNetwork& D, const std::vector<ParamNodes>& pn,
                         const Mat& x_r, const Mat& x_f, double lambda);

struct PenaltyValue {
    double value = 0.0;
    GradientBundle grad;
};

// Standalone evaluation (value + parameter gradient) of each penalty.
PenaltyValue gp_penalty_at(const MlpNetwork& D, const Mat& x_hat, double lambda);
PenaltyValue lp_penalty_at(const MlpNetwork& D, const Mat& x_hat, double lambda);
PenaltyValue gp_penalty(const MlpNetwork& D, const Mat& x_r, const Mat& x_f, double lambda,
                        Rng& rng);
PenaltyValue lp_penalty(const MlpNetwork& D, const Mat& x_r, const Mat& x_f, double lambda,
                        Rng& rng);
PenaltyValue zero_gp_penalty(const MlpNetwork& D, const Mat& x_r, const Mat& x_f, double lambda);

// Ascends mean[g1] + mean[g2] - penalty. With tag none or lambda 0 this is
// the clean step (and the penalty rng is left untouched).
StepMetrics discriminator_step_regularized(MlpNetwork& D, const Batch& batch, LossKind loss,
                                           const RegKind& reg, Optimizer& opt, Rng& penalty_rng,
                                           long long iteration);

}  // namespace datlab
