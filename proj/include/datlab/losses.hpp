#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "datlab/errors.hpp"
#include "datlab/mat.hpp"

namespace datlab {

enum class LossKind { vanilla, wgan, lsgan, hinge };

// Which per-sample transform of the critic output to apply: the real-side
// term, the fake-side term, or the fake-side term as seen by the generator
// (identical except for hinge, whose generator term is linear).
enum class GSide { real, fake, gen };

inline double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    double e = std::exp(t);
    return e / (1.0 + e);
}

// log(1 + e^u) without overflow.
inline double softplus(double u) {
    double m = u > 0.0 ? u : 0.0;
    return m + std::log1p(std::exp(-std::fabs(u)));
}

inline double g_value(LossKind k, GSide side, double t) {
    if (side == GSide::gen && k == LossKind::hinge) return -t;
    bool real = (side == GSide::real);
    switch (k) {
        case LossKind::vanilla: return real ? -softplus(-t) : -softplus(t);
        case LossKind::wgan: return real ? t : -t;
        case LossKind::lsgan: return real ? -(t - 1.0) * (t - 1.0) : -t * t;
        case LossKind::hinge: {
            if (real) return t >= 1.0 ? 0.0 : t - 1.0;
            return t <= -1.0 ? 0.0 : -1.0 - t;
        }
    }
    return 0.0;
}

inline double g_deriv(LossKind k, GSide side, double t) {
    if (side == GSide::gen && k == LossKind::hinge) return -1.0;
    bool real = (side == GSide::real);
    switch (k) {
        case LossKind::vanilla: return real ? sigmoid(-t) : -sigmoid(t);
        case LossKind::wgan: return real ? 1.0 : -1.0;
        case LossKind::lsgan: return real ? -2.0 * (t - 1.0) : -2.0 * t;
        case LossKind::hinge: {
            // at the kink, take the flat branch (derivative 0)
            if (real) return t < 1.0 ? 1.0 : 0.0;
            return t > -1.0 ? -1.0 : 0.0;
        }
    }
    return 0.0;
}

inline double g_second(LossKind k, GSide side, double t) {
    if (side == GSide::gen && k == LossKind::hinge) return 0.0;
    switch (k) {
        case LossKind::vanilla: return -sigmoid(t) * sigmoid(-t);
        case LossKind::wgan: return 0.0;
        case LossKind::lsgan: return -2.0;
        case LossKind::hinge: return 0.0;
    }
    return 0.0;
}

// Elementwise (g1(t), g2(t)) for a batch of critic outputs.
inline std::pair<Mat, Mat> loss_terms(LossKind k, const Mat& t) {
    if (!all_finite(t)) throw DomainError("loss_terms: non-finite critic output");
    Mat g1(t.rows, t.cols), g2(t.rows, t.cols);
    for (size_t i = 0; i < t.a.size(); ++i) {
        g1.a[i] = g_value(k, GSide::real, t.a[i]);
        g2.a[i] = g_value(k, GSide::fake, t.a[i]);
    }
    return {std::move(g1), std::move(g2)};
}

inline std::string loss_name(LossKind k) {
    switch (k) {
        case LossKind::vanilla: return "vanilla";
        case LossKind::wgan: return "wgan";
        case LossKind::lsgan: return "lsgan";
        case LossKind::hinge: return "hinge";
    }
    return "vanilla";
}

inline LossKind loss_from_name(const std::string& s) {
    if (s == "vanilla") return LossKind::vanilla;
    if (s == "wgan") return LossKind::wgan;
    if (s == "lsgan") return LossKind::lsgan;
    if (s == "hinge") return LossKind::hinge;
    throw ConfigError("unknown loss '" + s + "'");
}

}  // namespace datlab
