#include "datlab/gan.hpp"

#include "datlab/autodiff.hpp"
#include "datlab/errors.hpp"
#include "datlab/tape.hpp"

namespace datlab {

double g_mean(const Mat& y, LossKind loss, GSide side) {
    if (y.empty()) throw UsageError("g_mean: empty batch");
    double s = 0.0;
    for (double v : y.a) s += g_value(loss, side, v);
    return s / static_cast<double>(y.a.size());
}

double sign_case_fraction(const Mat& y_own, LossKind loss, GSide side, double opposite_mean) {
    if (y_own.empty()) return 0.0;
    long long above = 0;
    for (double v : y_own.a)
        if (g_value(loss, side, v) > opposite_mean) ++above;
    return static_cast<double>(above) / static_cast<double>(y_own.a.size());
}

StepMetrics discriminator_step_clean(MlpNetwork& D, const Batch& batch, LossKind loss,
                                     Optimizer& opt, long long iteration) {
    if (batch.x_r.rows != batch.x_f.rows)
        throw ShapeError("discriminator step: real and fake batch sizes differ");
    if (batch.x_r.rows == 0) throw UsageError("discriminator step: empty batch");

    Tape t;
    std::vector<ParamNodes> pn = push_params(t, D);
    int yr = forward_with_params(t, D, t.leaf(batch.x_r), pn);
    int yf = forward_with_params(t, D, t.leaf(batch.x_f), pn);
    int obj = t.add(t.mean_all(t.gfun_of(yr, loss, GSide::real)),
                    t.mean_all(t.gfun_of(yf, loss, GSide::fake)));

    StepMetrics m;
    m.d_loss_clean = m.d_loss_adv = t.val(obj).a[0];
    m.sign_frac_real = sign_case_fraction(t.val(yr), loss, GSide::real,
                                          g_mean(t.val(yf), loss, GSide::real));
    m.sign_frac_fake = sign_case_fraction(t.val(yf), loss, GSide::fake,
                                          g_mean(t.val(yr), loss, GSide::fake));

    GradientBundle g = grad_params(t, obj, pn, D);
    opt.step(D, g, Direction::ascend, iteration);
    return m;
}

StepMetrics generator_step(MlpNetwork& G, const MlpNetwork& D, const Mat& z, LossKind loss,
                           Optimizer& opt, long long iteration) {
    if (z.rows == 0) throw UsageError("generator step: empty latent batch");

    Tape t;
    std::vector<ParamNodes> pn = push_params(t, G);
    int xf = forward_with_params(t, G, t.leaf(z), pn);
    int yf = forward_on_tape(t, D, xf, nullptr);  // D parameters enter as constants
    int obj = t.mean_all(t.gfun_of(yf, loss, GSide::gen));

    StepMetrics m;
    m.g_loss = t.val(obj).a[0];

    GradientBundle g = grad_params(t, obj, pn, G);
    opt.step(G, g, Direction::descend, iteration);
    return m;
}

}  // namespace datlab
