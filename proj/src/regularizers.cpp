#include "datlab/regularizers.hpp"

#include "datlab/errors.hpp"

namespace datlab {

double default_lambda(RegTag tag) {
    switch (tag) {
        case RegTag::none: return 0.0;
        case RegTag::gp: return 10.0;
        case RegTag::lp: return 10.0;
        case RegTag::zero_gp: return 1.0;
    }
    return 0.0;
}

std::string reg_name(RegTag tag) {
    switch (tag) {
        case RegTag::none: return "none";
        case RegTag::gp: return "gp";
        case RegTag::lp: return "lp";
        case RegTag::zero_gp: return "zero_gp";
    }
    return "none";
}

RegTag reg_from_name(const std::string& s) {
    if (s == "none") return RegTag::none;
    if (s == "gp") return RegTag::gp;
    if (s == "lp") return RegTag::lp;
    if (s == "zero_gp") return RegTag::zero_gp;
    throw ConfigError("unknown regularizer '" + s + "'");
}

Mat draw_interpolates(const Mat& x_r, const Mat& x_f, Rng& rng) {
    if (x_r.rows == 0 || x_f.rows == 0) throw UsageError("interpolates: empty batch");
    if (!x_r.same_shape(x_f)) throw ShapeError("interpolates: batch shapes differ");
    Mat out(x_r.rows, x_r.cols);
    for (int i = 0; i < x_r.rows; ++i) {
        double ti = rng.uniform();
        for (int j = 0; j < x_r.cols; ++j)
            out(i, j) = ti * x_r(i, j) + (1.0 - ti) * x_f(i, j);
    }
    return out;
}

namespace {

// ||grad_x D|| per row at the given points, differentiably: forward, one
// recorded backward to the input, then the row norms of that adjoint.
int input_grad_row_norms(Tape& t, const MlpNetwork& D, const std::vector<ParamNodes>& pn,
                         const Mat& x, bool squared) {
    if (D.out_dim() != 1) throw UsageError("gradient penalty: discriminator must be scalar-output");
    int xn = t.leaf(x);
    int y = forward_with_params(t, D, xn, pn);
    int s = t.sum_all(y);
    std::vector<int> adj = t.backward(s, {xn});
    int gx = adj[0] >= 0 ? adj[0] : t.leaf(Mat::zeros(x.rows, x.cols));
    int nsq = t.row_norm_sq(gx);
    return squared ? nsq : t.sqrt_of(nsq);
}

}  // namespace

int gp_penalty_node(Tape& t, const MlpNetwork& D, const std::vector<ParamNodes>& pn,
                    const Mat& x_hat, double lambda) {
    if (x_hat.rows == 0) throw UsageError("gp_penalty: empty batch");
    int norms = input_grad_row_norms(t, D, pn, x_hat, false);
    int dev = t.add_scalar(norms, -1.0);
    return t.scale(t.mean_all(t.hadamard(dev, dev)), lambda);
}

int lp_penalty_node(Tape& t, const MlpNetwork& D, const std::vector<ParamNodes>& pn,
                    const Mat& x_hat, double lambda) {
    if (x_hat.rows == 0) throw UsageError("lp_penalty: empty batch");
    int norms = input_grad_row_norms(t, D, pn, x_hat, false);
    int dev = t.act(t.add_scalar(norms, -1.0), ActKind::relu);  // one-sided
    return t.scale(t.mean_all(t.hadamard(dev, dev)), lambda);
}

int zero_gp_penalty_node(Tape& t, const MlpNetwork& D, const std::vector<ParamNodes>& pn,
                         const Mat& x_r, const Mat& x_f, double lambda) {
    if (x_r.rows == 0 || x_f.rows == 0) throw UsageError("zero_gp_penalty: empty batch");
    int mr = t.mean_all(input_grad_row_norms(t, D, pn, x_r, true));
    int mf = t.mean_all(input_grad_row_norms(t, D, pn, x_f, true));
    return t.scale(t.add(mr, mf), 0.5 * lambda);
}

namespace {

PenaltyValue standalone(const MlpNetwork& D,
                        const std::function<int(Tape&, const std::vector<ParamNodes>&)>& build) {
    Tape t;
    std::vector<ParamNodes> pn = push_params(t, D);
    int pen = build(t, pn);
    PenaltyValue out;
    out.value = t.val(pen).a[0];
    out.grad = grad_params(t, pen, pn, D);
    return out;
}

}  // namespace

PenaltyValue gp_penalty_at(const MlpNetwork& D, const Mat& x_hat, double lambda) {
    return standalone(D, [&](Tape& t, const std::vector<ParamNodes>& pn) {
        return gp_penalty_node(t, D, pn, x_hat, lambda);
    });
}

PenaltyValue lp_penalty_at(const MlpNetwork& D, const Mat& x_hat, double lambda) {
    return standalone(D, [&](Tape& t, const std::vector<ParamNodes>& pn) {
        return lp_penalty_node(t, D, pn, x_hat, lambda);
    });
}

PenaltyValue gp_penalty(const MlpNetwork& D, const Mat& x_r, const Mat& x_f, double lambda,
                        Rng& rng) {
    return gp_penalty_at(D, draw_interpolates(x_r, x_f, rng), lambda);
}

PenaltyValue lp_penalty(const MlpNetwork& D, const Mat& x_r, const Mat& x_f, double lambda,
                        Rng& rng) {
    return lp_penalty_at(D, draw_interpolates(x_r, x_f, rng), lambda);
}

PenaltyValue zero_gp_penalty(const MlpNetwork& D, const Mat& x_r, const Mat& x_f, double lambda) {
    return standalone(D, [&](Tape& t, const std::vector<ParamNodes>& pn) {
        return zero_gp_penalty_node(t, D, pn, x_r, x_f, lambda);
    });
}

StepMetrics discriminator_step_regularized(MlpNetwork& D, const Batch& batch, LossKind loss,
                                           const RegKind& reg, Optimizer& opt, Rng& penalty_rng,
                                           long long iteration) {
    if (reg.lambda < 0.0) throw UsageError("regularizer weight must be non-negative");
    if (reg.tag == RegTag::none || reg.lambda == 0.0)
        return discriminator_step_clean(D, batch, loss, opt, iteration);
    if (batch.x_r.rows != batch.x_f.rows)
        throw ShapeError("discriminator step: real and fake batch sizes differ");
    if (batch.x_r.rows == 0) throw UsageError("discriminator step: empty batch");

    Tape t;
    std::vector<ParamNodes> pn = push_params(t, D);
    int yr = forward_with_params(t, D, t.leaf(batch.x_r), pn);
    int yf = forward_with_params(t, D, t.leaf(batch.x_f), pn);
    int d_loss = t.add(t.mean_all(t.gfun_of(yr, loss, GSide::real)),
                       t.mean_all(t.gfun_of(yf, loss, GSide::fake)));

    int pen;
    switch (reg.tag) {
        case RegTag::gp:
            pen = gp_penalty_node(t, D, pn, draw_interpolates(batch.x_r, batch.x_f, penalty_rng),
                                  reg.lambda);
            break;
        case RegTag::lp:
            pen = lp_penalty_node(t, D, pn, draw_interpolates(batch.x_r, batch.x_f, penalty_rng),
                                  reg.lambda);
            break;
        default:
            pen = zero_gp_penalty_node(t, D, pn, batch.x_r, batch.x_f, reg.lambda);
            break;
    }
    int obj = t.sub(d_loss, pen);

    StepMetrics m;
    m.d_loss_clean = m.d_loss_adv = t.val(d_loss).a[0];
    m.penalty = t.val(pen).a[0];
    m.sign_frac_real = sign_case_fraction(t.val(yr), loss, GSide::real,
                                          g_mean(t.val(yf), loss, GSide::real));
    m.sign_frac_fake = sign_case_fraction(t.val(yf), loss, GSide::fake,
                                          g_mean(t.val(yr), loss, GSide::fake));

    GradientBundle g = grad_params(t, obj, pn, D);
    opt.step(D, g, Direction::ascend, iteration);
    return m;
}

}  // namespace datlab
