#include "datlab/data.hpp"

#include <algorithm>
#include <cmath>

#include "datlab/errors.hpp"

namespace datlab {

MixtureSpec MixtureSpec::balanced9() {
    MixtureSpec s;
    const double g[3] = {-1.0, 0.0, 1.0};
    for (int ix = 0; ix < 3; ++ix)
        for (int iy = 0; iy < 3; ++iy) s.means.push_back({g[ix], g[iy]});
    s.weights.assign(9, 1.0 / 9.0);
    return s;
}

MixtureSpec MixtureSpec::imbalanced9() {
    MixtureSpec s = balanced9();
    const double col[3] = {0.15, 0.05, 0.8};  // left-to-right column mass
    for (int ix = 0; ix < 3; ++ix)
        for (int iy = 0; iy < 3; ++iy) s.weights[3 * ix + iy] = col[ix] / 3.0;
    return s;
}

void MixtureSpec::check() const {
    if (means.empty()) throw UsageError("mixture: no components");
    if (weights.size() != means.size()) throw UsageError("mixture: weights/means size mismatch");
    if (variance <= 0.0) throw UsageError("mixture: variance must be positive");
    double s = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw UsageError("mixture: negative weight");
        s += w;
    }
    if (std::fabs(s - 1.0) > 1e-12) throw UsageError("mixture: weights must sum to 1");
}

Mat sample_mixture_labeled(const MixtureSpec& spec, int n, Rng& rng, std::vector<int>& labels) {
    spec.check();
    if (n < 0) throw UsageError("sample_mixture: negative count");
    const double sd = std::sqrt(spec.variance);
    Mat out(n, 2);
    labels.assign(n, 0);
    const int m = static_cast<int>(spec.means.size());
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform(0.0, 1.0);
        int k = m - 1;
        double acc = 0.0;
        for (int c = 0; c < m; ++c) {
            acc += spec.weights[c];
            if (u < acc) {
                k = c;
                break;
            }
        }
        labels[i] = k;
        out(i, 0) = spec.means[k][0] + rng.normal(0.0, sd);
        out(i, 1) = spec.means[k][1] + rng.normal(0.0, sd);
    }
    return out;
}

Mat sample_mixture(const MixtureSpec& spec, int n, Rng& rng) {
    std::vector<int> labels;
    return sample_mixture_labeled(spec, n, rng, labels);
}

Mat sample_mixture(const MixtureSpec& spec, int n, uint64_t seed) {
    Rng rng(seed);
    return sample_mixture(spec, n, rng);
}

Mat sample_latent(int dim, int n, Rng& rng) {
    if (dim < 1) throw UsageError("sample_latent: dim must be >= 1");
    if (n < 0) throw UsageError("sample_latent: negative count");
    Mat z(n, dim);
    for (double& v : z.a) v = rng.normal();
    return z;
}

Mat sample_latent(int dim, int n, uint64_t seed) {
    Rng rng(seed);
    return sample_latent(dim, n, rng);
}

ModeStats mode_stats(const Mat& points, const MixtureSpec& spec) {
    spec.check();
    if (points.rows > 0 && points.cols != 2) throw UsageError("mode_stats: points must be 2-D");
    const int m = static_cast<int>(spec.means.size());
    ModeStats st;
    st.mode_frequencies.assign(m, 0.0);
    if (points.rows == 0) return st;  // all-zero stats

    const double thresh = 9.0 * spec.variance;
    std::vector<long long> hq(m, 0);
    long long hq_total = 0;
    for (int i = 0; i < points.rows; ++i) {
        int best = 0;
        double best_d = 0.0;
        for (int k = 0; k < m; ++k) {
            double dx = points(i, 0) - spec.means[k][0];
            double dy = points(i, 1) - spec.means[k][1];
            double d = dx * dx + dy * dy;
            if (k == 0 || d < best_d) {
                best = k;
                best_d = d;
            }
        }
        if (best_d <= thresh) {
            ++hq[best];
            ++hq_total;
        }
    }

    const double n_total = static_cast<double>(points.rows);
    const double cover_min = 0.02 * n_total;
    for (int k = 0; k < m; ++k) {
        st.mode_frequencies[k] = static_cast<double>(hq[k]) / n_total;
        if (static_cast<double>(hq[k]) >= cover_min) ++st.covered_modes;
    }
    st.hq_fraction = static_cast<double>(hq_total) / n_total;

    if (hq_total == 0) {
        st.tv_distance = 1.0;
    } else {
        double tv = 0.0;
        for (int k = 0; k < m; ++k)
            tv += std::fabs(static_cast<double>(hq[k]) / static_cast<double>(hq_total) -
                            spec.weights[k]);
        st.tv_distance = 0.5 * tv;
    }
    return st;
}

Gauss2 fit_gauss2(const Mat& points) {
    if (points.rows < 3) throw UsageError("fit_gauss2: need at least 3 points");
    if (points.cols != 2) throw UsageError("fit_gauss2: points must be 2-D");
    Gauss2 g;
    const double n = static_cast<double>(points.rows);
    for (int i = 0; i < points.rows; ++i) {
        g.mx += points(i, 0);
        g.my += points(i, 1);
    }
    g.mx /= n;
    g.my /= n;
    for (int i = 0; i < points.rows; ++i) {
        double dx = points(i, 0) - g.mx;
        double dy = points(i, 1) - g.my;
        g.sxx += dx * dx;
        g.sxy += dx * dy;
        g.syy += dy * dy;
    }
    g.sxx /= n - 1.0;
    g.sxy /= n - 1.0;
    g.syy /= n - 1.0;
    double det = g.sxx * g.syy - g.sxy * g.sxy;
    if (det <= 0.0) {
        g.sxx += 1e-9;
        g.syy += 1e-9;
    }
    return g;
}

double frechet_from_moments(const Gauss2& a, const Gauss2& b) {
    const double dmx = a.mx - b.mx;
    const double dmy = a.my - b.my;
    const double mean_term = dmx * dmx + dmy * dmy;
    const double tr_a = a.sxx + a.syy;
    const double tr_b = b.sxx + b.syy;
    const double det_a = a.sxx * a.syy - a.sxy * a.sxy;
    const double det_b = b.sxx * b.syy - b.sxy * b.sxy;
    // Tr(Sa Sb) for symmetric 2x2 blocks
    const double tr_ab = a.sxx * b.sxx + 2.0 * a.sxy * b.sxy + a.syy * b.syy;
    // 2-D closed form: Tr((Sa^1/2 Sb Sa^1/2)^1/2) = sqrt(Tr(Sa Sb) + 2 sqrt(det Sa det Sb))
    double inner = det_a * det_b;
    if (inner < 0.0) inner = 0.0;
    double arg = tr_ab + 2.0 * std::sqrt(inner);
    if (arg < 0.0) arg = 0.0;
    double d2 = mean_term + tr_a + tr_b - 2.0 * std::sqrt(arg);
    if (d2 < 0.0) d2 = 0.0;
    return d2;
}

double frechet_2d(const Mat& a, const Mat& b) {
    return frechet_from_moments(fit_gauss2(a), fit_gauss2(b));
}

}  // namespace datlab
