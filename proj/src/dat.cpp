#include "datlab/dat.hpp"

#include <cmath>

#include "datlab/autodiff.hpp"
#include "datlab/errors.hpp"
#include "datlab/tape.hpp"

namespace datlab {

namespace {

void check_perturb_inputs(const Mat& x, const Mat& other, const MlpNetwork& D) {
    if (other.rows == 0) throw UsageError("perturbation: empty opposite batch, target mean undefined");
    if (x.rows == 0) throw UsageError("perturbation: empty batch");
    if (D.out_dim() != 1) throw UsageError("perturbation: discriminator must be scalar-output");
}

// Frozen target: mean of the side's transform over the opposite batch.
double frozen_target(const Mat& other, const MlpNetwork& D, LossKind loss, GSide side,
                     StepObserver* obs) {
    Mat y = mlp_forward(D, other);
    if (obs) ++obs->target_mean_evals;
    return g_mean(y, loss, side);
}

// One gradient of |g_side(D(x)) - c| per row, c frozen.
Mat grad_abs_gap(const MlpNetwork& D, const Mat& x, LossKind loss, GSide side, double c) {
    return grad_input(D, x, [&](Tape& t, int y) {
        return t.abs_of(t.add_scalar(t.gfun_of(y, loss, side), -c));
    });
}

Perturbation perturb_with_target(const Mat& x, const MlpNetwork& D, LossKind loss, GSide side,
                                 double eps, int k, double c) {
    Perturbation p;
    if (eps == 0.0) {
        p.delta = Mat::zeros(x.rows, x.cols);
        return p;
    }
    const double step = -eps / static_cast<double>(k);
    Mat delta = Mat::zeros(x.rows, x.cols);
    Mat cur = x;
    for (int s = 0; s < k; ++s) {
        if (s > 0) {
            cur = x;
            for (size_t i = 0; i < cur.a.size(); ++i) cur.a[i] += delta.a[i];
        }
        Mat g = grad_abs_gap(D, cur, loss, side, c);
        for (size_t i = 0; i < delta.a.size(); ++i) delta.a[i] += step * g.a[i];
    }
    p.delta = std::move(delta);
    return p;
}

double sum_row_norms(const Mat& m) {
    double s = 0.0;
    for (int i = 0; i < m.rows; ++i) s += row_norm(m, i);
    return s;
}

}  // namespace

Perturbation perturb_real(const Mat& x_r, const Mat& x_f, const MlpNetwork& D, LossKind loss,
                          double eps, StepObserver* obs) {
    check_perturb_inputs(x_r, x_f, D);
    if (eps == 0.0) return Perturbation{Mat::zeros(x_r.rows, x_r.cols)};
    double c = frozen_target(x_f, D, loss, GSide::real, obs);
    return perturb_with_target(x_r, D, loss, GSide::real, eps, 1, c);
}

Perturbation perturb_fake(const Mat& x_f, const Mat& x_r, const MlpNetwork& D, LossKind loss,
                          double eps, StepObserver* obs) {
    check_perturb_inputs(x_f, x_r, D);
    if (eps == 0.0) return Perturbation{Mat::zeros(x_f.rows, x_f.cols)};
    double c = frozen_target(x_r, D, loss, GSide::fake, obs);
    return perturb_with_target(x_f, D, loss, GSide::fake, eps, 1, c);
}

Perturbation perturb_multi(const Mat& x, const Mat& other, const MlpNetwork& D, LossKind loss,
                           double eps, int k, GSide side, StepObserver* obs) {
    if (k < 1) throw UsageError("perturb_multi: step count must be >= 1");
    if (side != GSide::real && side != GSide::fake)
        throw UsageError("perturb_multi: side must be real or fake");
    check_perturb_inputs(x, other, D);
    if (eps == 0.0) return Perturbation{Mat::zeros(x.rows, x.cols)};
    double c = frozen_target(other, D, loss, side, obs);
    return perturb_with_target(x, D, loss, side, eps, k, c);
}

namespace {

Mat shifted(const Mat& x, const Mat& delta) {
    Mat out = x;
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] += delta.a[i];
    return out;
}

// Shared assembly for the dat/datt discriminator updates. When no position
// is active (or eps is 0) the built graph is exactly the clean one, which is
// what makes the zero-level reduction bit-identical.
StepMetrics step_dat_impl(MlpNetwork& D, const Batch& batch, LossKind loss,
                          const PerturbConfig& pcfg, Optimizer& opt, long long iteration,
                          bool together, StepObserver* obs) {
    if (batch.x_r.rows != batch.x_f.rows)
        throw ShapeError("discriminator step: real and fake batch sizes differ");
    if (batch.x_r.rows == 0) throw UsageError("discriminator step: empty batch");

    StepMetrics m;
    const bool perturb_r = pcfg.pos_real && pcfg.epsilon > 0.0;
    const bool perturb_f = pcfg.pos_fake && pcfg.epsilon > 0.0;

    Mat xr_adv = batch.x_r, xf_adv = batch.x_f;
    if (perturb_r) {
        Perturbation p = perturb_multi(batch.x_r, batch.x_f, D, loss, pcfg.epsilon, pcfg.steps,
                                       GSide::real, obs);
        m.delta_norm_sum += sum_row_norms(p.delta);
        xr_adv = shifted(batch.x_r, p.delta);
    }
    if (perturb_f) {
        Perturbation p = perturb_multi(batch.x_f, batch.x_r, D, loss, pcfg.epsilon, pcfg.steps,
                                       GSide::fake, obs);
        m.delta_norm_sum += sum_row_norms(p.delta);
        xf_adv = shifted(batch.x_f, p.delta);
    }
    if (pcfg.pos_real) m.delta_rows += batch.x_r.rows;
    if (pcfg.pos_fake) m.delta_rows += batch.x_f.rows;

    Tape t;
    std::vector<ParamNodes> pn = push_params(t, D);
    const bool any_adv = perturb_r || perturb_f;

    int yr_adv = forward_with_params(t, D, t.leaf(xr_adv), pn);
    int yf_adv = forward_with_params(t, D, t.leaf(xf_adv), pn);
    int obj_adv = t.add(t.mean_all(t.gfun_of(yr_adv, loss, GSide::real)),
                        t.mean_all(t.gfun_of(yf_adv, loss, GSide::fake)));
    if (obs) {
        obs->d_inputs.push_back(xr_adv);
        obs->d_inputs.push_back(xf_adv);
    }
    m.d_loss_adv = t.val(obj_adv).a[0];

    int obj;
    if (together && any_adv) {
        int yr = forward_with_params(t, D, t.leaf(batch.x_r), pn);
        int yf = forward_with_params(t, D, t.leaf(batch.x_f), pn);
        int obj_clean = t.add(t.mean_all(t.gfun_of(yr, loss, GSide::real)),
                              t.mean_all(t.gfun_of(yf, loss, GSide::fake)));
        m.d_loss_clean = t.val(obj_clean).a[0];
        m.sign_frac_real = sign_case_fraction(t.val(yr), loss, GSide::real,
                                              g_mean(t.val(yf), loss, GSide::real));
        m.sign_frac_fake = sign_case_fraction(t.val(yf), loss, GSide::fake,
                                              g_mean(t.val(yr), loss, GSide::fake));
        obj = t.scale(t.add(obj_clean, obj_adv), 0.5);
    } else {
        if (any_adv) {
            Mat yr = mlp_forward(D, batch.x_r);
            Mat yf = mlp_forward(D, batch.x_f);
            m.d_loss_clean = g_mean(yr, loss, GSide::real) + g_mean(yf, loss, GSide::fake);
            m.sign_frac_real = sign_case_fraction(yr, loss, GSide::real,
                                                  g_mean(yf, loss, GSide::real));
            m.sign_frac_fake = sign_case_fraction(yf, loss, GSide::fake,
                                                  g_mean(yr, loss, GSide::fake));
        } else {
            m.d_loss_clean = m.d_loss_adv;
            m.sign_frac_real = sign_case_fraction(t.val(yr_adv), loss, GSide::real,
                                                  g_mean(t.val(yf_adv), loss, GSide::real));
            m.sign_frac_fake = sign_case_fraction(t.val(yf_adv), loss, GSide::fake,
                                                  g_mean(t.val(yr_adv), loss, GSide::fake));
        }
        obj = obj_adv;
    }

    GradientBundle g = grad_params(t, obj, pn, D);
    opt.step(D, g, Direction::ascend, iteration);
    return m;
}

}  // namespace

StepMetrics discriminator_step_dat(MlpNetwork& D, const Batch& batch, LossKind loss,
                                   const PerturbConfig& pcfg, Optimizer& opt,
                                   long long iteration, StepObserver* obs) {
    return step_dat_impl(D, batch, loss, pcfg, opt, iteration, false, obs);
}

StepMetrics discriminator_step_datt(MlpNetwork& D, const Batch& batch, LossKind loss,
                                    const PerturbConfig& pcfg, Optimizer& opt,
                                    long long iteration, StepObserver* obs) {
    return step_dat_impl(D, batch, loss, pcfg, opt, iteration, true, obs);
}

StepMetrics generator_step_dat(MlpNetwork& G, const MlpNetwork& D, const Mat& z, const Mat& x_r,
                               LossKind loss, const PerturbConfig& pcfg, Optimizer& opt,
                               long long iteration, StepObserver* obs) {
    if (!pcfg.pos_gen || pcfg.epsilon == 0.0)
        return generator_step(G, D, z, loss, opt, iteration);
    if (z.rows == 0) throw UsageError("generator step: empty latent batch");

    Mat x_f = mlp_forward(G, z);
    Perturbation p = perturb_multi(x_f, x_r, D, loss, pcfg.epsilon, pcfg.steps, GSide::fake, obs);

    Tape t;
    std::vector<ParamNodes> pn = push_params(t, G);
    int xf = forward_with_params(t, G, t.leaf(z), pn);
    int xfp = t.add(xf, t.leaf(p.delta));  // delta is a constant for this update
    int yf = forward_on_tape(t, D, xfp, nullptr);
    int obj = t.mean_all(t.gfun_of(yf, loss, GSide::gen));

    StepMetrics m;
    m.g_loss = t.val(obj).a[0];
    m.delta_norm_sum = sum_row_norms(p.delta);
    m.delta_rows = p.delta.rows;

    GradientBundle g = grad_params(t, obj, pn, G);
    opt.step(G, g, Direction::descend, iteration);
    return m;
}

TaylorCheck taylor_check(const MlpNetwork& D, const Mat& x, LossKind loss, GSide side, double eps,
                         std::optional<double> target) {
    if (x.rows == 0) throw UsageError("taylor_check: empty batch");
    if (D.out_dim() != 1) throw UsageError("taylor_check: discriminator must be scalar-output");
    if (side != GSide::real && side != GSide::fake)
        throw UsageError("taylor_check: side must be real or fake");

    Mat y0 = mlp_forward(D, x);
    const double c = target ? *target : g_mean(y0, loss, side);
    Perturbation p = perturb_with_target(x, D, loss, side, eps, 1, c);

    TaylorCheck r;
    Mat y1 = mlp_forward(D, shifted(x, p.delta));
    r.lhs = g_mean(y1, loss, side);

    Mat g0 = grad_input(D, x, [&](Tape& t, int y) { return t.gfun_of(y, loss, side); });
    double dot = 0.0;
    for (size_t i = 0; i < g0.a.size(); ++i) dot += g0.a[i] * p.delta.a[i];
    r.first_order = dot / static_cast<double>(x.rows);
    r.rhs = g_mean(y0, loss, side) + r.first_order;
    r.residual = std::fabs(r.lhs - r.rhs);
    return r;
}

}  // namespace datlab
