#include "datlab/analysis.hpp"

#include <cmath>

#include "datlab/autodiff.hpp"
#include "datlab/dat.hpp"
#include "datlab/errors.hpp"
#include "datlab/gan.hpp"
#include "datlab/optim.hpp"
#include "datlab/rng.hpp"
#include "datlab/tape.hpp"

namespace datlab {

void AttackConfig::check() const {
    if (tau <= 0.0) throw UsageError("attack: tau must be positive");
    if (alpha <= 0.0) throw UsageError("attack: alpha must be positive");
    if (max_iters < 1) throw UsageError("attack: max_iters must be >= 1");
}

namespace {

struct BatchAttackOut {
    std::vector<char> success;
    std::vector<int> iterations;
    Mat x_final;
};

// All rows attacked in lockstep; converged rows drop out of the active set.
// Rows are independent end to end, so this matches per-sample attacks bit
// for bit.
BatchAttackOut attack_batch(const MlpNetwork& D, const Mat& x0, double target,
                            const AttackConfig& cfg) {
    cfg.check();
    if (D.out_dim() != 1) throw UsageError("attack: discriminator must be scalar-output");
    const int n = x0.rows;
    BatchAttackOut out;
    out.success.assign(n, 0);
    out.iterations.assign(n, 0);
    out.x_final = x0;

    std::vector<int> active;
    {
        Mat y = mlp_forward(D, x0);
        for (int i = 0; i < n; ++i) {
            if (std::fabs(y.a[i] - target) <= cfg.tau)
                out.success[i] = 1;  // already within tau: 0 iterations
            else
                active.push_back(i);
        }
    }

    Mat cur(0, x0.cols);
    for (int k = 1; k <= cfg.max_iters && !active.empty(); ++k) {
        cur.rows = static_cast<int>(active.size());
        cur.a.resize(static_cast<size_t>(cur.rows) * cur.cols);
        for (int r = 0; r < cur.rows; ++r)
            for (int j = 0; j < cur.cols; ++j) cur(r, j) = out.x_final(active[r], j);

        Mat g = grad_input(D, cur, [&](Tape& t, int y) {
            return t.abs_of(t.add_scalar(y, -target));
        });
        for (size_t i = 0; i < cur.a.size(); ++i) cur.a[i] -= cfg.alpha * g.a[i];
        if (!all_finite(cur)) throw AttackError("non-finite adversarial iterate", k);

        Mat y = mlp_forward(D, cur);
        std::vector<int> still;
        for (int r = 0; r < cur.rows; ++r) {
            const int i = active[r];
            out.iterations[i] = k;
            for (int j = 0; j < cur.cols; ++j) out.x_final(i, j) = cur(r, j);
            if (std::fabs(y.a[r] - target) <= cfg.tau)
                out.success[i] = 1;
            else
                still.push_back(i);
        }
        active.swap(still);
    }
    for (int i : active) out.iterations[i] = cfg.max_iters;
    return out;
}

std::optional<double> kbar(const BatchAttackOut& o) {
    double sum = 0.0;
    long long n = 0;
    for (size_t i = 0; i < o.success.size(); ++i) {
        if (o.success[i]) {
            sum += o.iterations[i];
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

double success_rate(const BatchAttackOut& o) {
    if (o.success.empty()) return 0.0;
    long long n = 0;
    for (char s : o.success) n += s;
    return static_cast<double>(n) / static_cast<double>(o.success.size());
}

double mean_output(const MlpNetwork& D, const Mat& x) {
    Mat y = mlp_forward(D, x);
    double s = 0.0;
    for (double v : y.a) s += v;
    return s / static_cast<double>(y.a.size());
}

}  // namespace

AttackResult attack_sample(const MlpNetwork& D, const Mat& x, double opposite_mean,
                           const AttackConfig& cfg) {
    if (x.rows != 1) throw UsageError("attack_sample: expects a single row");
    BatchAttackOut o = attack_batch(D, x, opposite_mean, cfg);
    AttackResult r;
    r.success = o.success[0] != 0;
    r.iterations = o.iterations[0];
    r.x_final = std::move(o.x_final);
    return r;
}

AttackReport attack_statistics(const MlpNetwork& D, const Mat& real, const Mat& fake,
                               const AttackConfig& cfg) {
    cfg.check();
    if (real.rows == 0 || fake.rows == 0) throw UsageError("attack_statistics: empty batch");
    const double mean_real = mean_output(D, real);
    const double mean_fake = mean_output(D, fake);

    BatchAttackOut fake_out = attack_batch(D, fake, mean_real, cfg);
    BatchAttackOut real_out = attack_batch(D, real, mean_fake, cfg);

    AttackReport rep;
    rep.cfg = cfg;
    rep.kbar_fake = kbar(fake_out);
    rep.kbar_real = kbar(real_out);
    rep.success_rate_fake = success_rate(fake_out);
    rep.success_rate_real = success_rate(real_out);
    return rep;
}

double spectral_norm(const Mat& W, int iters, double tol, uint64_t seed) {
    if (W.rows == 0 || W.cols == 0) return 0.0;
    bool zero = true;
    for (double v : W.a)
        if (v != 0.0) {
            zero = false;
            break;
        }
    if (zero) return 0.0;

    Rng rng(seed);
    std::vector<double> v(W.cols), u(W.rows), w(W.cols);
    double nv = 0.0;
    for (double& x : v) {
        x = rng.normal();
        nv += x * x;
    }
    nv = std::sqrt(nv);
    if (nv == 0.0) v[0] = 1.0;
    else
        for (double& x : v) x /= nv;

    double sigma = 0.0;
    for (int it = 0; it < iters; ++it) {
        // u = W v, normalized
        double nu = 0.0;
        for (int i = 0; i < W.rows; ++i) {
            double s = 0.0;
            const double* row = W.row(i);
            for (int j = 0; j < W.cols; ++j) s += row[j] * v[j];
            u[i] = s;
            nu += s * s;
        }
        nu = std::sqrt(nu);
        if (nu == 0.0) return 0.0;
        for (double& x : u) x /= nu;
        // w = Wᵀ u; its norm estimates sigma
        double nw = 0.0;
        for (int j = 0; j < W.cols; ++j) w[j] = 0.0;
        for (int i = 0; i < W.rows; ++i) {
            const double* row = W.row(i);
            for (int j = 0; j < W.cols; ++j) w[j] += row[j] * u[i];
        }
        for (int j = 0; j < W.cols; ++j) nw += w[j] * w[j];
        nw = std::sqrt(nw);
        if (nw == 0.0) return 0.0;
        for (int j = 0; j < W.cols; ++j) v[j] = w[j] / nw;
        if (it > 0 && std::fabs(nw - sigma) <= tol * nw) {
            sigma = nw;
            break;
        }
        sigma = nw;
    }
    return sigma;
}

double lipschitz_upper_bound(const MlpNetwork& net) {
    if (net.layers.empty()) throw UsageError("lipschitz_upper_bound: empty network");
    double prod = 1.0;
    for (const Layer& L : net.layers) prod *= spectral_norm(L.W);
    return prod;
}

double empirical_lipschitz(const MlpNetwork& D, const Mat& samples, int pair_budget,
                           uint64_t seed) {
    if (samples.rows < 2) throw UsageError("empirical_lipschitz: need at least 2 samples");
    if (pair_budget < 1) throw UsageError("empirical_lipschitz: pair budget must be >= 1");
    Mat y = mlp_forward(D, samples);
    Rng rng(seed);
    double best = 0.0;
    for (int p = 0; p < pair_budget; ++p) {
        int i = rng.index(samples.rows);
        int j = rng.index(samples.rows);
        if (i == j) continue;
        double dx = 0.0;
        for (int c = 0; c < samples.cols; ++c) {
            double d = samples(i, c) - samples(j, c);
            dx += d * d;
        }
        if (dx == 0.0) continue;
        double dy = 0.0;
        for (int c = 0; c < y.cols; ++c) {
            double d = y(i, c) - y(j, c);
            dy += d * d;
        }
        double ratio = std::sqrt(dy) / std::sqrt(dx);
        if (ratio > best) best = ratio;
    }
    return best;
}

LipschitzEstimate estimate_lipschitz(const MlpNetwork& D, const Mat& samples, int pair_budget,
                                     uint64_t seed) {
    LipschitzEstimate e;
    e.spectral_bound = lipschitz_upper_bound(D);
    e.empirical_sup = empirical_lipschitz(D, samples, pair_budget, seed);
    Mat g = grad_input(D, samples, [](Tape& t, int y) { return y; });
    double sum = 0.0, mx = 0.0;
    for (int i = 0; i < g.rows; ++i) {
        double n = row_norm(g, i);
        sum += n;
        if (n > mx) mx = n;
    }
    e.grad_norm_mean = g.rows ? sum / g.rows : 0.0;
    e.grad_norm_max = mx;
    return e;
}

std::optional<double> perturbation_alignment(const MlpNetwork& G, const MlpNetwork& D,
                                             const Mat& z, const Mat& x_r, LossKind loss,
                                             double sgd_lr, double eps) {
    Mat x_f0 = mlp_forward(G, z);
    Perturbation p = perturb_fake(x_f0, x_r, D, loss, eps);

    MlpNetwork G2 = G;
    Optimizer opt(OptimKind{OptimTag::sgd, sgd_lr});
    generator_step(G2, D, z, loss, opt, 0);
    Mat x_f1 = mlp_forward(G2, z);

    double sum = 0.0;
    long long n = 0;
    for (int i = 0; i < x_f0.rows; ++i) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (int j = 0; j < x_f0.cols; ++j) {
            double a = x_f1(i, j) - x_f0(i, j);
            double b = p.delta(i, j);
            dot += a * b;
            na += a * a;
            nb += b * b;
        }
        if (na == 0.0 || nb == 0.0) continue;
        sum += dot / (std::sqrt(na) * std::sqrt(nb));
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

}  // namespace datlab
