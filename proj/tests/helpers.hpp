#pragma once

// shared fixtures and independent oracles for the test binaries

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "datlab/mat.hpp"
#include "datlab/network.hpp"
#include "datlab/rng.hpp"

namespace th {

inline datlab::Mat random_mat(int r, int c, datlab::Rng& rng, double sd = 1.0) {
    datlab::Mat m(r, c);
    for (double& v : m.a) v = rng.normal(0.0, sd);
    return m;
}

// small random net with chosen activation on the hidden layers
inline datlab::MlpNetwork random_net(int in, int out, const std::vector<int>& widths,
                                     datlab::ActKind hidden_act, uint64_t seed,
                                     double init_std = 0.4) {
    std::vector<int> dims;
    dims.push_back(in);
    for (int w : widths) dims.push_back(w);
    dims.push_back(out);
    std::vector<datlab::ActKind> acts(widths.size(), hidden_act);
    acts.push_back(datlab::ActKind::identity);
    datlab::MlpNetwork net = datlab::make_mlp(dims, acts, seed, init_std);
    datlab::Rng brng(seed ^ 0xb1a5ULL);
    for (datlab::Layer& l : net.layers)  // non-zero biases exercise that path
        for (double& b : l.b.a) b = brng.normal(0.0, init_std);
    return net;
}

// central finite difference of scalar_of_net over every parameter
inline void fd_param_grads(datlab::MlpNetwork net,
                           const std::function<double(const datlab::MlpNetwork&)>& scalar_of_net,
                           double h, std::vector<datlab::Mat>& dW, std::vector<datlab::Mat>& db) {
    dW.clear();
    db.clear();
    for (size_t l = 0; l < net.layers.size(); ++l) {
        datlab::Mat gw(net.layers[l].W.rows, net.layers[l].W.cols);
        for (size_t i = 0; i < gw.a.size(); ++i) {
            const double keep = net.layers[l].W.a[i];
            net.layers[l].W.a[i] = keep + h;
            const double up = scalar_of_net(net);
            net.layers[l].W.a[i] = keep - h;
            const double dn = scalar_of_net(net);
            net.layers[l].W.a[i] = keep;
            gw.a[i] = (up - dn) / (2.0 * h);
        }
        dW.push_back(gw);
        datlab::Mat gb(1, net.layers[l].b.cols);
        for (size_t i = 0; i < gb.a.size(); ++i) {
            const double keep = net.layers[l].b.a[i];
            net.layers[l].b.a[i] = keep + h;
            const double up = scalar_of_net(net);
            net.layers[l].b.a[i] = keep - h;
            const double dn = scalar_of_net(net);
            net.layers[l].b.a[i] = keep;
            gb.a[i] = (up - dn) / (2.0 * h);
        }
        db.push_back(gb);
    }
}

inline double rel_err(const std::vector<datlab::Mat>& a, const std::vector<datlab::Mat>& b) {
    double num = 0.0, den = 0.0;
    for (size_t k = 0; k < a.size(); ++k)
        for (size_t i = 0; i < a[k].a.size(); ++i) {
            const double d = a[k].a[i] - b[k].a[i];
            num += d * d;
            den += b[k].a[i] * b[k].a[i];
        }
    return std::sqrt(num) / (std::sqrt(den) + 1e-300);
}

inline double rel_err(const datlab::Mat& a, const datlab::Mat& b) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.a.size(); ++i) {
        const double d = a.a[i] - b.a[i];
        num += d * d;
        den += b.a[i] * b.a[i];
    }
    return std::sqrt(num) / (std::sqrt(den) + 1e-300);
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix; returns eigenvalues.
// Independent oracle for spectral norms (via WᵀW) and matrix square roots.
inline std::vector<double> jacobi_eigenvalues(datlab::Mat S, datlab::Mat* vectors = nullptr) {
    const int n = S.rows;
    datlab::Mat V(n, n);
    for (int i = 0; i < n; ++i) V(i, i) = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0, total = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                total += S(i, j) * S(i, j);
                if (j > i) off += S(i, j) * S(i, j);
            }
        if (off <= 1e-26 * std::max(1.0, total)) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (S(p, q) == 0.0) continue;
                const double theta = (S(q, q) - S(p, p)) / (2.0 * S(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double skp = S(k, p), skq = S(k, q);
                    S(k, p) = c * skp - s * skq;
                    S(k, q) = s * skp + c * skq;
                }
                for (int k = 0; k < n; ++k) {
                    const double spk = S(p, k), sqk = S(q, k);
                    S(p, k) = c * spk - s * sqk;
                    S(q, k) = s * spk + c * sqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = S(i, i);
    if (vectors) *vectors = V;
    return ev;
}

// largest singular value via the Jacobi oracle
inline double svd_sigma_max(const datlab::Mat& W) {
    const int n = W.cols;
    datlab::Mat S(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < W.rows; ++k) s += W(k, i) * W(k, j);
            S(i, j) = s;
        }
    double mx = 0.0;
    for (double ev : jacobi_eigenvalues(S)) mx = std::max(mx, ev);
    return std::sqrt(std::max(0.0, mx));
}

// metrics stream with the wall-clock column dropped (timing is environment,
// not experiment) — the basis for bit-identity comparisons
inline std::string metrics_without_wall_clock(const std::string& path) {
    std::ifstream in(path);
    if (!in) return "<missing:" + path + ">";
    std::string out, line;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#') {
            const auto tab = line.rfind('\t');
            if (tab != std::string::npos) line.erase(tab);
        }
        out += line;
        out += '\n';
    }
    return out;
}

inline int metrics_data_rows(const std::string& path) {
    std::ifstream in(path);
    int n = 0;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        ++n;
    }
    return n;
}

inline std::string fresh_dir(const std::string& tag) {
    namespace fs = std::filesystem;
    const fs::path p = fs::temp_directory_path() / ("datlab_tests_" + tag);
    std::error_code ec;
    fs::remove_all(p, ec);
    fs::create_directories(p);
    return p.string();
}

inline bool params_bit_equal(const datlab::MlpNetwork& a, const datlab::MlpNetwork& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (size_t i = 0; i < a.layers.size(); ++i)
        if (!datlab::bit_equal(a.layers[i].W, b.layers[i].W) ||
            !datlab::bit_equal(a.layers[i].b, b.layers[i].b))
            return false;
    return true;
}

}  // namespace th
