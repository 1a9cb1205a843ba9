#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "datlab/losses.hpp"
#include "datlab/network.hpp"
#include "datlab/optim.hpp"

#include "helpers.hpp"

using namespace datlab;

TEST_CASE("loss transform values match closed forms") {
    const double t = 0.7;
    CHECK(g_value(LossKind::vanilla, GSide::real, t) ==
          doctest::Approx(-std::log1p(std::exp(-t))).epsilon(1e-15));
    CHECK(g_value(LossKind::vanilla, GSide::fake, t) ==
          doctest::Approx(-std::log1p(std::exp(t))).epsilon(1e-15));
    CHECK(g_value(LossKind::wgan, GSide::real, t) == t);
    CHECK(g_value(LossKind::wgan, GSide::fake, t) == -t);
    CHECK(g_value(LossKind::lsgan, GSide::real, t) == -(t - 1.0) * (t - 1.0));
    CHECK(g_value(LossKind::lsgan, GSide::fake, t) == -t * t);
    CHECK(g_value(LossKind::hinge, GSide::real, 0.4) == doctest::Approx(-0.6));
    CHECK(g_value(LossKind::hinge, GSide::real, 1.4) == 0.0);
    CHECK(g_value(LossKind::hinge, GSide::fake, -0.4) == doctest::Approx(-0.6));
    CHECK(g_value(LossKind::hinge, GSide::fake, -1.4) == 0.0);
    // generator side only differs for hinge
    CHECK(g_value(LossKind::hinge, GSide::gen, t) == -t);
    CHECK(g_value(LossKind::vanilla, GSide::gen, t) == g_value(LossKind::vanilla, GSide::fake, t));
    CHECK(g_value(LossKind::wgan, GSide::gen, t) == g_value(LossKind::wgan, GSide::fake, t));
    CHECK(g_value(LossKind::lsgan, GSide::gen, t) == g_value(LossKind::lsgan, GSide::fake, t));
}

TEST_CASE("real and fake transforms mirror each other") {
    for (LossKind k : {LossKind::vanilla, LossKind::wgan, LossKind::hinge}) {
        for (double t : {-2.3, -0.5, 0.0, 0.4, 1.9}) {
            CHECK(g_value(k, GSide::real, t) ==
                  doctest::Approx(g_value(k, GSide::fake, -t)).epsilon(1e-15));
        }
    }
}

TEST_CASE("first derivatives match finite differences away from kinks") {
    const double h = 1e-6;
    for (LossKind k : {LossKind::vanilla, LossKind::wgan, LossKind::lsgan, LossKind::hinge}) {
        for (GSide side : {GSide::real, GSide::fake, GSide::gen}) {
            for (double t : {-1.8, -0.6, 0.3, 0.7, 2.1}) {
                const double fd =
                    (g_value(k, side, t + h) - g_value(k, side, t - h)) / (2.0 * h);
                CHECK(g_deriv(k, side, t) == doctest::Approx(fd).epsilon(1e-7));
            }
        }
    }
}

TEST_CASE("second derivatives match finite differences of the first") {
    const double h = 1e-5;
    for (LossKind k : {LossKind::vanilla, LossKind::wgan, LossKind::lsgan}) {
        for (GSide side : {GSide::real, GSide::fake}) {
            for (double t : {-1.3, 0.2, 1.6}) {
                const double fd =
                    (g_deriv(k, side, t + h) - g_deriv(k, side, t - h)) / (2.0 * h);
                CHECK(g_second(k, side, t) == doctest::Approx(fd).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("hinge takes the flat branch exactly at the kink") {
    CHECK(g_deriv(LossKind::hinge, GSide::real, 1.0) == 0.0);
    CHECK(g_deriv(LossKind::hinge, GSide::fake, -1.0) == 0.0);
    CHECK(g_deriv(LossKind::hinge, GSide::real, 1.0 - 1e-12) == 1.0);
    CHECK(g_deriv(LossKind::hinge, GSide::fake, -1.0 + 1e-12) == -1.0);
    CHECK(g_second(LossKind::hinge, GSide::real, 1.0) == 0.0);
}

TEST_CASE("loss_terms batches both sides and rejects non-finite input") {
    Mat t(2, 1);
    t(0, 0) = -0.9;
    t(1, 0) = 1.2;
    const auto [g1, g2] = loss_terms(LossKind::lsgan, t);
    CHECK(g1(0, 0) == g_value(LossKind::lsgan, GSide::real, -0.9));
    CHECK(g2(1, 0) == g_value(LossKind::lsgan, GSide::fake, 1.2));
    Mat bad(1, 1);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(loss_terms(LossKind::vanilla, bad), DomainError);
}

TEST_CASE("names round-trip, unknown names rejected") {
    for (LossKind k : {LossKind::vanilla, LossKind::wgan, LossKind::lsgan, LossKind::hinge})
        CHECK(loss_from_name(loss_name(k)) == k);
    CHECK_THROWS_AS(loss_from_name("wasserstein"), ConfigError);
    CHECK(optim_from_name("sgd") == OptimTag::sgd);
    CHECK(optim_from_name("adam") == OptimTag::adam);
    CHECK_THROWS_AS(optim_from_name("rmsprop"), ConfigError);
}

namespace {

MlpNetwork tiny_net() {
    // single 1x2 linear layer, so each parameter is easy to track by hand
    MlpNetwork net;
    Layer L;
    L.W = Mat(1, 2);
    L.W(0, 0) = 0.5;
    L.W(0, 1) = -0.25;
    L.b = Mat(1, 1);
    L.b(0, 0) = 0.125;
    L.act = ActKind::identity;
    net.layers.push_back(L);
    return net;
}

GradientBundle grad_of(const MlpNetwork& net, double gw0, double gw1, double gb) {
    GradientBundle g = GradientBundle::zeros_like(net);
    g.dW[0](0, 0) = gw0;
    g.dW[0](0, 1) = gw1;
    g.db[0](0, 0) = gb;
    return g;
}

}  // namespace

TEST_CASE("sgd ascends and descends by lr times gradient") {
    MlpNetwork net = tiny_net();
    OptimKind k;
    k.tag = OptimTag::sgd;
    k.lr = 0.1;
    Optimizer opt(k);
    opt.step(net, grad_of(net, 1.0, -2.0, 4.0), Direction::ascend, 1);
    CHECK(net.layers[0].W(0, 0) == doctest::Approx(0.5 + 0.1).epsilon(1e-15));
    CHECK(net.layers[0].W(0, 1) == doctest::Approx(-0.25 - 0.2).epsilon(1e-15));
    CHECK(net.layers[0].b(0, 0) == doctest::Approx(0.125 + 0.4).epsilon(1e-15));
    opt.step(net, grad_of(net, 1.0, -2.0, 4.0), Direction::descend, 2);
    CHECK(net.layers[0].W(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(net.layers[0].b(0, 0) == doctest::Approx(0.125).epsilon(1e-15));
}

TEST_CASE("adam follows the moment recurrence for five steps") {
    MlpNetwork net = tiny_net();
    OptimKind k;  // defaults: lr 2e-4, beta1 0, beta2 0.9, eps 1e-8
    Optimizer opt(k);

    // hand recurrence for W(0,0) under a fixed gradient sequence
    const double grads[5] = {1.0, -0.5, 2.0, 0.25, -1.0};
    double p = 0.5, m = 0.0, v = 0.0;
    for (int s = 1; s <= 5; ++s) {
        const double g = grads[s - 1];
        m = k.beta1 * m + (1.0 - k.beta1) * g;
        v = k.beta2 * v + (1.0 - k.beta2) * g * g;
        const double mh = m / (1.0 - std::pow(k.beta1, s));
        const double vh = v / (1.0 - std::pow(k.beta2, s));
        p += k.lr * mh / (std::sqrt(vh) + k.eps);
        opt.step(net, grad_of(net, g, 0.0, 0.0), Direction::ascend, s);
        CHECK(net.layers[0].W(0, 0) == p);  // same arithmetic, same bits
    }
    CHECK(opt.steps == 5);
    // beta1 = 0 means no momentum: first step moves by ~lr regardless of scale
    CHECK(std::fabs(0.5 + k.lr * 1.0 / (1.0 + k.eps) -
                    [&] {
                        MlpNetwork n2 = tiny_net();
                        Optimizer o2(k);
                        o2.step(n2, grad_of(n2, 1.0, 0, 0), Direction::ascend, 1);
                        return n2.layers[0].W(0, 0);
                    }()) < 1e-18);
}

TEST_CASE("optimizer rejects bad gradients") {
    MlpNetwork net = tiny_net();
    Optimizer opt(OptimKind{});
    GradientBundle g = grad_of(net, 1.0, 1.0, 1.0);
    g.dW[0](0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(opt.step(net, g, Direction::ascend, 17), TrainingError);
    try {
        opt.step(net, g, Direction::ascend, 17);
    } catch (const TrainingError& e) {
        CHECK(e.iteration == 17);
    }

    GradientBundle wrong;  // empty bundle
    CHECK_THROWS_AS(opt.step(net, wrong, Direction::ascend, 1), UsageError);
}
