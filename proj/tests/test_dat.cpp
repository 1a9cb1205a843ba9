#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "datlab/dat.hpp"
#include "datlab/rng.hpp"

#include "helpers.hpp"

using namespace datlab;

namespace {

MlpNetwork linear_critic(double w0, double w1, double c) {
    MlpNetwork net;
    net.layers.push_back(Layer{Mat(1, 2, {w0, w1}), Mat(1, 1, {c}), ActKind::identity});
    return net;
}

double dot2(double a0, double a1, double b0, double b1) { return a0 * b0 + a1 * b1; }

Batch random_batch(Rng& rng, int rows, int dim) {
    Batch b;
    b.x_r = th::random_mat(rows, dim, rng);
    b.x_f = th::random_mat(rows, dim, rng, 0.6);
    b.z = th::random_mat(rows, dim, rng);
    return b;
}

}  // namespace

TEST_CASE("perturbations of a linear critic have a closed form") {
    // D(x) = w.x + c under wgan: the gap gradient is sign(D(x) - T) * w,
    // so every perturbed row moves by -eps * sign * w
    const double w0 = 0.6, w1 = -0.8, c = 0.1, eps = 0.5;
    MlpNetwork D = linear_critic(w0, w1, c);
    Mat x_r(3, 2, {1.0, 0.0, -2.0, 1.0, 0.3, 0.4});
    Mat x_f(2, 2, {0.0, 0.0, 1.0, 1.0});

    const double T = ((dot2(w0, w1, 0.0, 0.0) + c) + (dot2(w0, w1, 1.0, 1.0) + c)) / 2.0;
    const Perturbation p = perturb_real(x_r, x_f, D, LossKind::wgan, eps);
    REQUIRE(p.delta.same_shape(x_r));
    for (int i = 0; i < 3; ++i) {
        const double v = dot2(w0, w1, x_r(i, 0), x_r(i, 1)) + c - T;
        const double s = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
        CHECK(p.delta(i, 0) == doctest::Approx(-eps * s * w0).epsilon(1e-14));
        CHECK(p.delta(i, 1) == doctest::Approx(-eps * s * w1).epsilon(1e-14));
    }

    // fake side: g2 = -t, gap gradient is -sign * w
    const double Tf = -((dot2(w0, w1, 1.0, 0.0) + c) + (dot2(w0, w1, -2.0, 1.0) + c) +
                        (dot2(w0, w1, 0.3, 0.4) + c)) /
                      3.0;
    const Perturbation pf = perturb_fake(x_f, x_r, D, LossKind::wgan, eps);
    for (int i = 0; i < 2; ++i) {
        const double v = -(dot2(w0, w1, x_f(i, 0), x_f(i, 1)) + c) - Tf;
        const double s = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
        CHECK(pf.delta(i, 0) == doctest::Approx(eps * s * w0).epsilon(1e-14));
        CHECK(pf.delta(i, 1) == doctest::Approx(eps * s * w1).epsilon(1e-14));
    }
}

TEST_CASE("the step uses the raw gradient, so critic scale changes step size") {
    Mat x_r(2, 2, {1.0, 0.5, -0.5, 2.0});
    Mat x_f(2, 2, {0.1, 0.1, 0.2, -0.3});
    MlpNetwork D1 = linear_critic(0.4, 0.3, 0.0);
    MlpNetwork D2 = linear_critic(0.8, 0.6, 0.0);  // doubled weights, same signs
    const Perturbation p1 = perturb_real(x_r, x_f, D1, LossKind::wgan, 1.0);
    const Perturbation p2 = perturb_real(x_r, x_f, D2, LossKind::wgan, 1.0);
    for (size_t i = 0; i < p1.delta.a.size(); ++i)
        CHECK(p2.delta.a[i] == doctest::Approx(2.0 * p1.delta.a[i]).epsilon(1e-14));
}

TEST_CASE("the target mean is evaluated once and frozen") {
    Rng rng(301);
    MlpNetwork D = th::random_net(2, 1, {5}, ActKind::tanh_, 61);
    Batch b = random_batch(rng, 8, 2);

    StepObserver obs;
    perturb_real(b.x_r, b.x_f, D, LossKind::vanilla, 0.5, &obs);
    CHECK(obs.target_mean_evals == 1);

    StepObserver obs3;
    perturb_multi(b.x_r, b.x_f, D, LossKind::vanilla, 0.5, 3, GSide::real, &obs3);
    CHECK(obs3.target_mean_evals == 1);  // frozen across the three sub-steps

    StepObserver obs0;
    perturb_real(b.x_r, b.x_f, D, LossKind::vanilla, 0.0, &obs0);
    CHECK(obs0.target_mean_evals == 0);  // zero size short-circuits

    StepObserver obs2;
    Optimizer opt(OptimKind{});
    PerturbConfig pcfg;
    pcfg.enabled = true;
    pcfg.epsilon = 0.5;
    discriminator_step_dat(D, b, LossKind::vanilla, pcfg, opt, 1, &obs2);
    CHECK(obs2.target_mean_evals == 2);  // one per perturbed side
}

TEST_CASE("a row sitting exactly on the target mean does not move") {
    // dyadic values make the gap exactly zero in floating point
    MlpNetwork D = linear_critic(0.5, 0.25, 0.125);
    Mat x_f(2, 2, {1.0, 1.0, 3.0, 3.0});
    Mat x_r(2, 2, {2.0, 2.0, 8.0, 8.0});  // first row = fake mean, second well above
    const Perturbation p = perturb_real(x_r, x_f, D, LossKind::wgan, 0.5);
    CHECK(p.delta(0, 0) == 0.0);
    CHECK(p.delta(0, 1) == 0.0);
    CHECK(p.delta(1, 0) == -0.5 * 0.5);
    CHECK(p.delta(1, 1) == -0.5 * 0.25);
}

TEST_CASE("one multi-step equals the plain perturbation bitwise") {
    Rng rng(302);
    MlpNetwork D = th::random_net(2, 1, {6}, ActKind::leaky_relu, 62);
    Batch b = random_batch(rng, 10, 2);
    const Perturbation a = perturb_real(b.x_r, b.x_f, D, LossKind::lsgan, 0.8);
    const Perturbation m = perturb_multi(b.x_r, b.x_f, D, LossKind::lsgan, 0.8, 1, GSide::real);
    CHECK(bit_equal(a.delta, m.delta));
}

TEST_CASE("multi-step re-evaluates the gradient at intermediate points") {
    // linear critic: after the first half step overshoots the frozen target,
    // the second half step walks back, cancelling exactly
    const double w0 = 0.5, w1 = 0.25, eps = 4.0;  // eps/2*||w||^2 = 0.625 > v0
    MlpNetwork D = linear_critic(w0, w1, 0.0);
    Mat x_f(1, 2, {0.0, 0.0});                    // T = 0
    Mat x_r(1, 2, {0.5, 0.5});                    // v0 = 0.375 > 0
    const Perturbation p2 = perturb_multi(x_r, x_f, D, LossKind::wgan, eps, 2, GSide::real);
    CHECK(p2.delta(0, 0) == 0.0);
    CHECK(p2.delta(0, 1) == 0.0);
    const Perturbation p1 = perturb_multi(x_r, x_f, D, LossKind::wgan, eps, 1, GSide::real);
    CHECK(p1.delta(0, 0) == -eps * w0);
    CHECK(p1.delta(0, 1) == -eps * w1);
}

TEST_CASE("zero-size adversarial steps are bit-identical to clean ones") {
    Rng rng(303);
    MlpNetwork Da = th::random_net(2, 1, {8, 8}, ActKind::leaky_relu, 63);
    MlpNetwork Db = Da;
    Optimizer oa(OptimKind{}), ob(OptimKind{});
    PerturbConfig pcfg;
    pcfg.enabled = true;
    pcfg.epsilon = 0.0;
    for (int k = 1; k <= 5; ++k) {
        Batch b = random_batch(rng, 16, 2);
        discriminator_step_dat(Da, b, LossKind::vanilla, pcfg, oa, k);
        discriminator_step_clean(Db, b, LossKind::vanilla, ob, k);
        CHECK(th::params_bit_equal(Da, Db));
    }
}

TEST_CASE("the ascent objective sees the shifted inputs") {
    Rng rng(304);
    MlpNetwork D = th::random_net(2, 1, {7}, ActKind::tanh_, 64);
    MlpNetwork Dpre = D;
    Batch b = random_batch(rng, 6, 2);
    PerturbConfig pcfg;
    pcfg.enabled = true;
    pcfg.epsilon = 0.7;
    StepObserver obs;
    Optimizer opt(OptimKind{});
    discriminator_step_dat(D, b, LossKind::vanilla, pcfg, opt, 1, &obs);
    REQUIRE(obs.d_inputs.size() == 2);
    const Perturbation pr = perturb_real(b.x_r, b.x_f, Dpre, LossKind::vanilla, 0.7);
    const Perturbation pf = perturb_fake(b.x_f, b.x_r, Dpre, LossKind::vanilla, 0.7);
    Mat xr = b.x_r, xf = b.x_f;
    for (size_t i = 0; i < xr.a.size(); ++i) xr.a[i] += pr.delta.a[i];
    for (size_t i = 0; i < xf.a.size(); ++i) xf.a[i] += pf.delta.a[i];
    CHECK(bit_equal(obs.d_inputs[0], xr));
    CHECK(bit_equal(obs.d_inputs[1], xf));
}

TEST_CASE("averaging the clean objective in changes the update") {
    Rng rng(305);
    MlpNetwork Da = th::random_net(2, 1, {8}, ActKind::leaky_relu, 65);
    MlpNetwork Db = Da;
    Optimizer oa(OptimKind{}), ob(OptimKind{});
    PerturbConfig pcfg;
    pcfg.enabled = true;
    pcfg.epsilon = 1.0;
    StepMetrics last{};
    for (int k = 1; k <= 20; ++k) {
        Batch b = random_batch(rng, 16, 2);
        discriminator_step_dat(Da, b, LossKind::vanilla, pcfg, oa, k);
        last = discriminator_step_datt(Db, b, LossKind::vanilla, pcfg, ob, k);
    }
    CHECK_FALSE(th::params_bit_equal(Da, Db));
    CHECK(last.d_loss_clean != last.d_loss_adv);
}

TEST_CASE("generator perturbation is opt-in") {
    Rng rng(306);
    MlpNetwork Ga = th::random_net(3, 2, {6}, ActKind::tanh_, 66);
    MlpNetwork Gb = Ga;
    MlpNetwork Gc = Ga;
    MlpNetwork D = th::random_net(2, 1, {6}, ActKind::tanh_, 67);
    Mat z = th::random_mat(8, 3, rng);
    Mat x_r = th::random_mat(8, 2, rng);
    Optimizer oa(OptimKind{}), ob(OptimKind{}), oc(OptimKind{});
    PerturbConfig off;
    off.enabled = true;
    off.epsilon = 0.9;
    off.pos_gen = false;
    generator_step_dat(Ga, D, z, x_r, LossKind::vanilla, off, oa, 1);
    generator_step(Gb, D, z, LossKind::vanilla, ob, 1);
    CHECK(th::params_bit_equal(Ga, Gb));

    PerturbConfig on = off;
    on.pos_gen = true;
    StepObserver obs;
    generator_step_dat(Gc, D, z, x_r, LossKind::vanilla, on, oc, 1, &obs);
    CHECK_FALSE(th::params_bit_equal(Gc, Gb));
    CHECK(obs.target_mean_evals == 1);
}

TEST_CASE("expansion check is exact for a linear critic on dyadic data") {
    MlpNetwork D = linear_critic(0.5, -0.25, 0.0);
    Mat x(4, 2, {1.0, 0.5, -0.5, 0.25, 2.0, -1.0, 0.75, 0.5});
    const TaylorCheck r = taylor_check(D, x, LossKind::wgan, GSide::real, 0.5);
    CHECK(r.residual == 0.0);

    // pinning the target outside the output range fixes every row's sign,
    // making the first-order term exactly -eps * ||w||^2 (or its negative)
    const double nw2 = 0.5 * 0.5 + 0.25 * 0.25;
    const TaylorCheck lo = taylor_check(D, x, LossKind::wgan, GSide::real, 0.5, -100.0);
    CHECK(lo.first_order == -0.5 * nw2);
    const TaylorCheck hi = taylor_check(D, x, LossKind::wgan, GSide::real, 0.5, 100.0);
    CHECK(hi.first_order == 0.5 * nw2);
}

TEST_CASE("perturbation input validation") {
    MlpNetwork D = linear_critic(1.0, 1.0, 0.0);
    Mat x(2, 2), e(0, 2);
    CHECK_THROWS_AS(perturb_real(e, x, D, LossKind::wgan, 0.5), UsageError);
    CHECK_THROWS_AS(perturb_real(x, e, D, LossKind::wgan, 0.5), UsageError);
    CHECK_THROWS_AS(perturb_multi(x, x, D, LossKind::wgan, 0.5, 0, GSide::real), UsageError);
    CHECK_THROWS_AS(perturb_multi(x, x, D, LossKind::wgan, 0.5, 1, GSide::gen), UsageError);
    MlpNetwork wide = th::random_net(2, 2, {4}, ActKind::tanh_, 68);
    CHECK_THROWS_AS(perturb_real(x, x, wide, LossKind::wgan, 0.5), UsageError);
    CHECK_THROWS_AS(taylor_check(wide, x, LossKind::wgan, GSide::real, 0.5), UsageError);
}
