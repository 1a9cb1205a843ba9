#include "datlab/autodiff.hpp"

#include "datlab/errors.hpp"

namespace datlab {

GradientBundle GradientBundle::zeros_like(const MlpNetwork& net) {
    GradientBundle g;
    for (const Layer& L : net.layers) {
        g.dW.push_back(Mat::zeros(L.W.rows, L.W.cols));
        g.db.push_back(Mat::zeros(1, L.b.cols));
    }
    return g;
}

bool GradientBundle::finite() const {
    for (const Mat& m : dW)
        if (!all_finite(m)) return false;
    for (const Mat& m : db)
        if (!all_finite(m)) return false;
    return true;
}

std::vector<ParamNodes> push_params(Tape& t, const MlpNetwork& net) {
    std::vector<ParamNodes> pn;
    pn.reserve(net.layers.size());
    for (const Layer& L : net.layers) {
        ParamNodes p;
        p.w = t.leaf(L.W);
        p.b = t.leaf(L.b);
        pn.push_back(p);
    }
    return pn;
}

int forward_with_params(Tape& t, const MlpNetwork& net, int x_node,
                        const std::vector<ParamNodes>& pn) {
    if (net.layers.empty()) throw UsageError("forward_with_params: empty network");
    if (pn.size() != net.layers.size())
        throw UsageError("forward_with_params: param node list mismatch");
    if (t.val(x_node).cols != net.in_dim())
        throw ShapeError("forward_with_params: input has " + std::to_string(t.val(x_node).cols) +
                         " columns, network expects " + std::to_string(net.in_dim()));
    if (!all_finite(t.val(x_node))) throw DomainError("forward_with_params: non-finite input");
    int h = x_node;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        h = t.act(t.add_rowvec(t.matmul(h, pn[l].w, false, true), pn[l].b), net.layers[l].act);
    }
    return h;
}

int forward_on_tape(Tape& t, const MlpNetwork& net, int x_node, std::vector<ParamNodes>* pn) {
    std::vector<ParamNodes> p = push_params(t, net);
    int h = forward_with_params(t, net, x_node, p);
    if (pn) *pn = std::move(p);
    return h;
}

GradientBundle grad_params(Tape& t, int root, const std::vector<ParamNodes>& pn,
                           const MlpNetwork& net) {
    if (pn.size() != net.layers.size()) throw UsageError("grad_params: param node list mismatch");
    std::vector<int> wrt;
    wrt.reserve(2 * pn.size());
    for (const ParamNodes& p : pn) {
        wrt.push_back(p.w);
        wrt.push_back(p.b);
    }
    std::vector<int> adj = t.backward(root, wrt);
    GradientBundle g;
    for (size_t l = 0; l < pn.size(); ++l) {
        g.dW.push_back(t.grad_or_zero(adj[2 * l], pn[l].w));
        g.db.push_back(t.grad_or_zero(adj[2 * l + 1], pn[l].b));
    }
    return g;
}

GradientBundle grad_params(const MlpNetwork& net, const Mat& x, const ScalarGraphFn& fn) {
    Tape t;
    std::vector<ParamNodes> pn;
    int y = forward_on_tape(t, net, t.leaf(x), &pn);
    int root = fn(t, y);
    if (t.val(root).rows != 1 || t.val(root).cols != 1)
        throw UsageError("grad_params: loss graph must end in a 1x1 scalar");
    return grad_params(t, root, pn, net);
}

Mat grad_input(const MlpNetwork& net, const Mat& x, const RowGraphFn& row_fn) {
    Tape t;
    int xn = t.leaf(x);
    int y = forward_on_tape(t, net, xn, nullptr);
    int rows = row_fn(t, y);
    if (t.val(rows).rows != x.rows || t.val(rows).cols != 1)
        throw UsageError("grad_input: row transform must return one scalar per row");
    // rows are independent, so the gradient of the sum splits row-by-row
    int s = t.sum_all(rows);
    std::vector<int> adj = t.backward(s, {xn});
    return t.grad_or_zero(adj[0], xn);
}

GradientBundle grad_params_of_input_grad_norm(const MlpNetwork& net, const Mat& x) {
    if (net.out_dim() != 1)
        throw UsageError("grad_params_of_input_grad_norm: network must be scalar-output");
    Tape t;
    int xn = t.leaf(x);
    std::vector<ParamNodes> pn;
    int y = forward_on_tape(t, net, xn, &pn);
    int s = t.sum_all(y);
    std::vector<int> adj = t.backward(s, {xn});
    if (adj[0] == -1) return GradientBundle::zeros_like(net);
    int norm_sq = t.row_norm_sq(adj[0]);  // batch x 1
    int m = t.mean_all(norm_sq);
    return grad_params(t, m, pn, net);
}

}  // namespace datlab
