#include "datlab/network.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "datlab/errors.hpp"
#include "datlab/kernels.hpp"
#include "datlab/rng.hpp"

namespace datlab {

void MlpNetwork::check() const {
    if (layers.empty()) throw UsageError("network has no layers");
    for (size_t l = 0; l < layers.size(); ++l) {
        const Layer& L = layers[l];
        if (L.b.rows != 1 || L.b.cols != L.W.rows)
            throw ShapeError("layer " + std::to_string(l) + ": bias must be 1x" +
                             std::to_string(L.W.rows));
        if (l + 1 < layers.size() && layers[l + 1].W.cols != L.W.rows)
            throw ShapeError("layer dims do not chain at layer " + std::to_string(l));
        if (!all_finite(L.W) || !all_finite(L.b))
            throw DomainError("non-finite parameter in layer " + std::to_string(l));
    }
}

MlpNetwork make_mlp(const std::vector<int>& dims, const std::vector<ActKind>& acts,
                    uint64_t seed, double init_std) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
        throw UsageError("make_mlp: need dims {in,...,out} and one activation per layer");
    Rng rng(seed);
    MlpNetwork net;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer L;
        L.W = Mat(dims[l + 1], dims[l]);
        for (double& w : L.W.a) w = rng.normal(0.0, init_std);
        L.b = Mat(1, dims[l + 1]);
        L.act = acts[l];
        net.layers.push_back(std::move(L));
    }
    return net;
}

MlpNetwork make_mlp_default(int in, int out, int hidden, int width, uint64_t seed) {
    std::vector<int> dims{in};
    std::vector<ActKind> acts;
    for (int i = 0; i < hidden; ++i) {
        dims.push_back(width);
        acts.push_back(ActKind::leaky_relu);
    }
    dims.push_back(out);
    acts.push_back(ActKind::identity);
    return make_mlp(dims, acts, seed);
}

Mat mlp_forward(const MlpNetwork& net, const Mat& x) {
    if (net.layers.empty()) throw UsageError("mlp_forward: empty network");
    if (x.cols != net.in_dim())
        throw ShapeError("mlp_forward: input has " + std::to_string(x.cols) +
                         " columns, network expects " + std::to_string(net.in_dim()));
    if (!all_finite(x)) throw DomainError("mlp_forward: non-finite input");

    Mat h = x, wt, z;
    for (const Layer& L : net.layers) {
        kern::transpose(L.W, wt);
        kern::matmul(h, wt, z);
        // bias + activation fused per row; same op order as the tape path
        struct Ctx {
            const Mat* b;
            Mat* z;
            ActKind k;
        } ctx{&L.b, &z, L.act};
        kern::detail::parallel_rows(z.rows, &ctx, [](void* p, int i) {
            auto* c = static_cast<Ctx*>(p);
            double* row = c->z->row(i);
            const double* bv = c->b->a.data();
            for (int j = 0; j < c->z->cols; ++j) row[j] = act_f(c->k, row[j] + bv[j]);
        });
        h = std::move(z);
        z = Mat();
    }
    return h;
}

namespace {

std::string hexstr(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_double_tok(const std::string& tok) {
    const char* s = tok.c_str();
    char* end = nullptr;
    double v = std::strtod(s, &end);
    if (end != s + tok.size()) throw IoError("bad numeric token '" + tok + "'");
    return v;
}

}  // namespace

void save_network(const MlpNetwork& net, const std::string& path) {
    net.check();
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "mlp-net-v1\n";
    f << "layers " << net.layers.size() << "\n";
    for (size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& L = net.layers[l];
        f << "layer " << l << " " << L.W.cols << " " << L.W.rows << " " << act_name(L.act) << "\n";
        f << "W";
        for (double v : L.W.a) f << " " << hexstr(v);
        f << "\nb";
        for (double v : L.b.a) f << " " << hexstr(v);
        f << "\n";
    }
    if (!f.good()) throw IoError("write failed for '" + path + "'");
}

MlpNetwork load_network(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::string tok;
    f >> tok;
    if (tok != "mlp-net-v1") throw IoError("'" + path + "': not a network file");
    size_t n = 0;
    f >> tok >> n;
    if (tok != "layers" || n == 0) throw IoError("'" + path + "': bad layer count");
    MlpNetwork net;
    for (size_t l = 0; l < n; ++l) {
        size_t idx;
        int in, out;
        std::string act;
        f >> tok >> idx >> in >> out >> act;
        if (!f || tok != "layer" || idx != l || in <= 0 || out <= 0)
            throw IoError("'" + path + "': bad layer header at layer " + std::to_string(l));
        Layer L;
        L.act = act_from_name(act);
        L.W = Mat(out, in);
        f >> tok;
        if (tok != "W") throw IoError("'" + path + "': expected W block");
        for (double& v : L.W.a) {
            f >> tok;
            if (!f) throw IoError("'" + path + "': truncated W block");
            v = parse_double_tok(tok);
        }
        L.b = Mat(1, out);
        f >> tok;
        if (tok != "b") throw IoError("'" + path + "': expected b block");
        for (double& v : L.b.a) {
            f >> tok;
            if (!f) throw IoError("'" + path + "': truncated b block");
            v = parse_double_tok(tok);
        }
        net.layers.push_back(std::move(L));
    }
    try {
        net.check();
    } catch (const Error& e) {
        throw IoError("'" + path + "': " + e.what());
    }
    return net;
}

}  // namespace datlab
