#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "datlab/autodiff.hpp"
#include "datlab/errors.hpp"
#include "datlab/network.hpp"

namespace datlab {

enum class OptimTag { sgd, adam };
enum class Direction { ascend, descend };

struct OptimKind {
    OptimTag tag = OptimTag::adam;
    double lr = 2e-4;
    double beta1 = 0.0;
    double beta2 = 0.9;
    double eps = 1e-8;
};

inline std::string optim_name(OptimTag t) { return t == OptimTag::sgd ? "sgd" : "adam"; }
inline OptimTag optim_from_name(const std::string& s) {
    if (s == "sgd") return OptimTag::sgd;
    if (s == "adam") return OptimTag::adam;
    throw ConfigError("unknown optimizer '" + s + "'");
}

struct Optimizer {
    OptimKind k;
    long long steps = 0;
    std::vector<Mat> mW, vW, mB, vB;

    explicit Optimizer(OptimKind kind) : k(kind) {}

    void step(MlpNetwork& net, const GradientBundle& g, Direction dir, long long iteration) {
        if (g.dW.size() != net.layers.size() || g.db.size() != net.layers.size())
            throw UsageError("optimizer step: gradient shape mismatch");
        if (!g.finite()) throw TrainingError("non-finite gradient", iteration);
        const double s = dir == Direction::ascend ? 1.0 : -1.0;
        if (k.tag == OptimTag::sgd) {
            for (size_t l = 0; l < net.layers.size(); ++l) {
                apply_sgd(net.layers[l].W, g.dW[l], s);
                apply_sgd(net.layers[l].b, g.db[l], s);
            }
            return;
        }
        if (mW.empty()) {
            for (const Layer& L : net.layers) {
                mW.push_back(Mat::zeros(L.W.rows, L.W.cols));
                vW.push_back(Mat::zeros(L.W.rows, L.W.cols));
                mB.push_back(Mat::zeros(1, L.b.cols));
                vB.push_back(Mat::zeros(1, L.b.cols));
            }
        }
        ++steps;
        const double c1 = 1.0 - std::pow(k.beta1, static_cast<double>(steps));
        const double c2 = 1.0 - std::pow(k.beta2, static_cast<double>(steps));
        for (size_t l = 0; l < net.layers.size(); ++l) {
            apply_adam(net.layers[l].W, g.dW[l], mW[l], vW[l], c1, c2, s);
            apply_adam(net.layers[l].b, g.db[l], mB[l], vB[l], c1, c2, s);
        }
    }

private:
    void apply_sgd(Mat& p, const Mat& g, double s) {
        for (size_t i = 0; i < p.a.size(); ++i) p.a[i] += s * k.lr * g.a[i];
    }

    void apply_adam(Mat& p, const Mat& g, Mat& m, Mat& v, double c1, double c2, double s) {
        for (size_t i = 0; i < p.a.size(); ++i) {
            m.a[i] = k.beta1 * m.a[i] + (1.0 - k.beta1) * g.a[i];
            v.a[i] = k.beta2 * v.a[i] + (1.0 - k.beta2) * g.a[i] * g.a[i];
            const double mh = m.a[i] / c1;
            const double vh = v.a[i] / c2;
            p.a[i] += s * k.lr * mh / (std::sqrt(vh) + k.eps);
        }
    }
};

}  // namespace datlab
