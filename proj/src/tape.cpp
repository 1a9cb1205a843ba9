#include "datlab/tape.hpp"

#include <cmath>
#include <string>

#include "datlab/kernels.hpp"

namespace datlab {

namespace {

void check_same_shape(const Mat& x, const Mat& y, const char* what) {
    if (!x.same_shape(y))
        throw ShapeError(std::string(what) + ": " + std::to_string(x.rows) + "x" +
                         std::to_string(x.cols) + " vs " + std::to_string(y.rows) + "x" +
                         std::to_string(y.cols));
}

// A + broadcast row vector, row-parallel with a fixed per-row kernel.
void add_rowvec_eval(const Mat& A, const Mat& b, Mat& out) {
    out.rows = A.rows;
    out.cols = A.cols;
    out.a.resize(A.a.size());
    struct Ctx {
        const Mat* A;
        const Mat* b;
        Mat* out;
    } ctx{&A, &b, &out};
    kern::detail::parallel_rows(A.rows, &ctx, [](void* p, int i) {
        auto* c = static_cast<Ctx*>(p);
        const double* src = c->A->row(i);
        const double* bv = c->b->a.data();
        double* dst = c->out->row(i);
        for (int j = 0; j < c->A->cols; ++j) dst[j] = src[j] + bv[j];
    });
}

// Evaluates one node given a value-lookup for its operands. Shared by the
// eager path and replay_check so both see identical arithmetic.
template <typename At>
Mat eval_node(const Node& nd, const At& at) {
    Mat out;
    switch (nd.op) {
        case Op::leaf:
            out = nd.val;  // only replay uses this branch
            break;
        case Op::matmul: {
            Mat at_scratch, bt_scratch;
            const Mat* A = &at(nd.a);
            const Mat* B = &at(nd.b);
            if (nd.ta) {
                kern::transpose(*A, at_scratch);
                A = &at_scratch;
            }
            if (nd.tb) {
                kern::transpose(*B, bt_scratch);
                B = &bt_scratch;
            }
            if (A->cols != B->rows)
                throw ShapeError("matmul: inner dimensions " + std::to_string(A->cols) +
                                 " vs " + std::to_string(B->rows));
            kern::matmul(*A, *B, out);
            break;
        }
        case Op::add:
            check_same_shape(at(nd.a), at(nd.b), "add");
            kern::map2(at(nd.a), at(nd.b), out, [](double x, double y) { return x + y; });
            break;
        case Op::sub:
            check_same_shape(at(nd.a), at(nd.b), "sub");
            kern::map2(at(nd.a), at(nd.b), out, [](double x, double y) { return x - y; });
            break;
        case Op::hadamard:
            check_same_shape(at(nd.a), at(nd.b), "hadamard");
            kern::map2(at(nd.a), at(nd.b), out, [](double x, double y) { return x * y; });
            break;
        case Op::divide:
            check_same_shape(at(nd.a), at(nd.b), "divide");
            kern::map2(at(nd.a), at(nd.b), out, [](double x, double y) { return x / y; });
            break;
        case Op::scale_: {
            double s = nd.s;
            kern::map1(at(nd.a), out, [s](double x) { return s * x; });
            break;
        }
        case Op::add_scalar_: {
            double s = nd.s;
            kern::map1(at(nd.a), out, [s](double x) { return x + s; });
            break;
        }
        case Op::add_rowvec: {
            const Mat& A = at(nd.a);
            const Mat& b = at(nd.b);
            if (b.rows != 1 || b.cols != A.cols)
                throw ShapeError("add_rowvec: bias must be 1x" + std::to_string(A.cols));
            add_rowvec_eval(A, b, out);
            break;
        }
        case Op::act: {
            ActKind k = nd.akind;
            kern::map1(at(nd.a), out, [k](double x) { return act_f(k, x); });
            break;
        }
        case Op::act_deriv: {
            ActKind k = nd.akind;
            kern::map1(at(nd.a), out, [k](double x) { return act_df(k, x); });
            break;
        }
        case Op::abs_:
            kern::map1(at(nd.a), out, [](double x) { return std::fabs(x); });
            break;
        case Op::sign_:
            kern::map1(at(nd.a), out, [](double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); });
            break;
        case Op::sqrt_:
            kern::map1(at(nd.a), out, [](double x) { return std::sqrt(x); });
            break;
        case Op::gfun: {
            LossKind k = nd.lkind;
            GSide sd = nd.lside;
            kern::map1(at(nd.a), out, [k, sd](double x) { return g_value(k, sd, x); });
            break;
        }
        case Op::gfun_prime: {
            LossKind k = nd.lkind;
            GSide sd = nd.lside;
            kern::map1(at(nd.a), out, [k, sd](double x) { return g_deriv(k, sd, x); });
            break;
        }
        case Op::gfun_second: {
            LossKind k = nd.lkind;
            GSide sd = nd.lside;
            kern::map1(at(nd.a), out, [k, sd](double x) { return g_second(k, sd, x); });
            break;
        }
        case Op::sum_all_:
            out = Mat(1, 1);
            out.a[0] = kern::sum_all(at(nd.a));
            break;
        case Op::row_sum_:
            kern::row_sum(at(nd.a), out);
            break;
        case Op::col_sum_:
            kern::col_sum(at(nd.a), out);
            break;
        case Op::bc_scalar: {
            const Mat& A = at(nd.a);
            if (A.rows != 1 || A.cols != 1) throw ShapeError("bc_scalar: source must be 1x1");
            kern::bcast_all(A.a[0], nd.r, nd.c, out);
            break;
        }
        case Op::bc_col: {
            const Mat& A = at(nd.a);
            if (A.cols != 1) throw ShapeError("bc_col: source must be a column");
            kern::bcast_col(A, nd.c, out);
            break;
        }
        case Op::bc_row: {
            const Mat& A = at(nd.a);
            if (A.rows != 1) throw ShapeError("bc_row: source must be a row");
            kern::bcast_row(A, nd.r, out);
            break;
        }
    }
    return out;
}

}  // namespace

int Tape::push(Node nd) {
    if (nd.op != Op::leaf) {
        nd.val = eval_node(nd, [this](int i) -> const Mat& { return nodes[i].val; });
    }
    nodes.push_back(std::move(nd));
    return static_cast<int>(nodes.size()) - 1;
}

int Tape::leaf(Mat v) {
    Node nd;
    nd.op = Op::leaf;
    nd.val = std::move(v);
    return push(std::move(nd));
}

int Tape::matmul(int a, int b, bool ta, bool tb) {
    Node nd;
    nd.op = Op::matmul;
    nd.a = a;
    nd.b = b;
    nd.ta = ta;
    nd.tb = tb;
    return push(std::move(nd));
}

int Tape::add(int a, int b) { Node nd; nd.op = Op::add; nd.a = a; nd.b = b; return push(std::move(nd)); }
int Tape::sub(int a, int b) { Node nd; nd.op = Op::sub; nd.a = a; nd.b = b; return push(std::move(nd)); }
int Tape::hadamard(int a, int b) { Node nd; nd.op = Op::hadamard; nd.a = a; nd.b = b; return push(std::move(nd)); }
int Tape::divide(int a, int b) { Node nd; nd.op = Op::divide; nd.a = a; nd.b = b; return push(std::move(nd)); }

int Tape::scale(int a, double s) { Node nd; nd.op = Op::scale_; nd.a = a; nd.s = s; return push(std::move(nd)); }
int Tape::add_scalar(int a, double s) { Node nd; nd.op = Op::add_scalar_; nd.a = a; nd.s = s; return push(std::move(nd)); }
int Tape::add_rowvec(int a, int b) { Node nd; nd.op = Op::add_rowvec; nd.a = a; nd.b = b; return push(std::move(nd)); }

int Tape::act(int a, ActKind k) { Node nd; nd.op = Op::act; nd.a = a; nd.akind = k; return push(std::move(nd)); }

int Tape::act_deriv_of(int a, ActKind k) {
    // tanh's derivative is differentiable and handled by composition in
    // backward(); this node is reserved for the piecewise-constant kinds.
    if (k == ActKind::tanh_) throw UsageError("act_deriv_of: tanh derivative is composed, not a primitive");
    Node nd;
    nd.op = Op::act_deriv;
    nd.a = a;
    nd.akind = k;
    return push(std::move(nd));
}

int Tape::abs_of(int a) { Node nd; nd.op = Op::abs_; nd.a = a; return push(std::move(nd)); }
int Tape::sign_of(int a) { Node nd; nd.op = Op::sign_; nd.a = a; return push(std::move(nd)); }
int Tape::sqrt_of(int a) { Node nd; nd.op = Op::sqrt_; nd.a = a; return push(std::move(nd)); }

int Tape::gfun_of(int a, LossKind k, GSide side) {
    Node nd; nd.op = Op::gfun; nd.a = a; nd.lkind = k; nd.lside = side; return push(std::move(nd));
}
int Tape::gfun_prime_of(int a, LossKind k, GSide side) {
    Node nd; nd.op = Op::gfun_prime; nd.a = a; nd.lkind = k; nd.lside = side; return push(std::move(nd));
}
int Tape::gfun_second_of(int a, LossKind k, GSide side) {
    Node nd; nd.op = Op::gfun_second; nd.a = a; nd.lkind = k; nd.lside = side; return push(std::move(nd));
}

int Tape::sum_all(int a) { Node nd; nd.op = Op::sum_all_; nd.a = a; return push(std::move(nd)); }
int Tape::row_sum(int a) { Node nd; nd.op = Op::row_sum_; nd.a = a; return push(std::move(nd)); }
int Tape::col_sum(int a) { Node nd; nd.op = Op::col_sum_; nd.a = a; return push(std::move(nd)); }

int Tape::bcast_scalar(int a, int rows, int cols) {
    Node nd; nd.op = Op::bc_scalar; nd.a = a; nd.r = rows; nd.c = cols; return push(std::move(nd));
}
int Tape::bcast_col(int a, int cols) {
    Node nd; nd.op = Op::bc_col; nd.a = a; nd.c = cols; nd.r = nodes[a].val.rows; return push(std::move(nd));
}
int Tape::bcast_row(int a, int rows) {
    Node nd; nd.op = Op::bc_row; nd.a = a; nd.r = rows; nd.c = nodes[a].val.cols; return push(std::move(nd));
}

int Tape::mean_all(int a) {
    const Mat& v = val(a);
    if (v.empty()) throw UsageError("mean_all: empty matrix");
    return scale(sum_all(a), 1.0 / static_cast<double>(v.size()));
}

int Tape::row_norm_sq(int a) { return row_sum(hadamard(a, a)); }
int Tape::row_norm(int a) { return sqrt_of(row_norm_sq(a)); }

std::vector<int> Tape::backward(int root, const std::vector<int>& wrt) {
    if (root < 0 || root >= size()) throw UsageError("backward: bad root id");
    if (val(root).rows != 1 || val(root).cols != 1)
        throw UsageError("backward: root must be a 1x1 scalar");

    std::vector<int> adj(static_cast<size_t>(root) + 1, -1);
    adj[root] = leaf(Mat::filled(1, 1, 1.0));

    auto deposit = [&](int parent, int contrib) {
        if (parent < 0) return;
        adj[parent] = (adj[parent] == -1) ? contrib : add(adj[parent], contrib);
    };

    for (int i = root; i >= 0; --i) {
        const int g = adj[i];
        if (g == -1) continue;
        // copy the metadata; builders below may reallocate `nodes`
        const Node meta = [&] {
            Node m;
            const Node& nd = nodes[i];
            m.op = nd.op; m.a = nd.a; m.b = nd.b; m.s = nd.s;
            m.ta = nd.ta; m.tb = nd.tb;
            m.akind = nd.akind; m.lkind = nd.lkind; m.lside = nd.lside;
            m.r = nd.r; m.c = nd.c;
            return m;
        }();
        switch (meta.op) {
            case Op::leaf:
                break;
            case Op::matmul:
                // C = op_a(A) op_b(B); adjoints expressed with transpose flags
                deposit(meta.a, meta.ta ? matmul(meta.b, g, meta.tb, true)
                                        : matmul(g, meta.b, false, !meta.tb));
                deposit(meta.b, meta.tb ? matmul(g, meta.a, true, meta.ta)
                                        : matmul(meta.a, g, !meta.ta, false));
                break;
            case Op::add:
                deposit(meta.a, g);
                deposit(meta.b, g);
                break;
            case Op::sub:
                deposit(meta.a, g);
                deposit(meta.b, scale(g, -1.0));
                break;
            case Op::hadamard:
                deposit(meta.a, hadamard(g, meta.b));
                deposit(meta.b, hadamard(g, meta.a));
                break;
            case Op::divide:
                // C = A/B: dA = g/B, dB = -g*C/B
                deposit(meta.a, divide(g, meta.b));
                deposit(meta.b, scale(divide(hadamard(g, i), meta.b), -1.0));
                break;
            case Op::scale_:
                deposit(meta.a, scale(g, meta.s));
                break;
            case Op::add_scalar_:
                deposit(meta.a, g);
                break;
            case Op::add_rowvec:
                deposit(meta.a, g);
                deposit(meta.b, col_sum(g));
                break;
            case Op::act:
                switch (meta.akind) {
                    case ActKind::identity:
                        deposit(meta.a, g);
                        break;
                    case ActKind::relu:
                    case ActKind::leaky_relu:
                        deposit(meta.a, hadamard(g, act_deriv_of(meta.a, meta.akind)));
                        break;
                    case ActKind::tanh_: {
                        // f' = 1 - f^2, reusing the recorded output, so the
                        // derivative itself stays differentiable
                        const Mat& y = val(i);
                        int ones = leaf(Mat::filled(y.rows, y.cols, 1.0));
                        deposit(meta.a, hadamard(g, sub(ones, hadamard(i, i))));
                        break;
                    }
                }
                break;
            case Op::act_deriv:
                break;  // piecewise constant: zero derivative a.e.
            case Op::abs_:
                deposit(meta.a, hadamard(g, sign_of(meta.a)));
                break;
            case Op::sign_:
                break;  // zero a.e.
            case Op::sqrt_:
                // dA = g * 0.5 / sqrt(A), reusing the recorded output
                deposit(meta.a, divide(scale(g, 0.5), i));
                break;
            case Op::gfun:
                deposit(meta.a, hadamard(g, gfun_prime_of(meta.a, meta.lkind, meta.lside)));
                break;
            case Op::gfun_prime:
                deposit(meta.a, hadamard(g, gfun_second_of(meta.a, meta.lkind, meta.lside)));
                break;
            case Op::gfun_second:
                throw DomainError("third derivative of a loss transform is not supported");
            case Op::sum_all_: {
                const Mat& src = val(meta.a);
                deposit(meta.a, bcast_scalar(g, src.rows, src.cols));
                break;
            }
            case Op::row_sum_:
                deposit(meta.a, bcast_col(g, val(meta.a).cols));
                break;
            case Op::col_sum_:
                deposit(meta.a, bcast_row(g, val(meta.a).rows));
                break;
            case Op::bc_scalar:
                deposit(meta.a, sum_all(g));
                break;
            case Op::bc_col:
                deposit(meta.a, row_sum(g));
                break;
            case Op::bc_row:
                deposit(meta.a, col_sum(g));
                break;
        }
    }

    std::vector<int> out;
    out.reserve(wrt.size());
    for (int id : wrt) {
        if (id < 0 || id >= static_cast<int>(adj.size()))
            out.push_back(-1);
        else
            out.push_back(adj[id]);
    }
    return out;
}

Mat Tape::grad_or_zero(int adj_id, int wrt_id) const {
    if (adj_id >= 0) return val(adj_id);
    const Mat& w = val(wrt_id);
    return Mat::zeros(w.rows, w.cols);
}

bool Tape::replay_check() const {
    std::vector<Mat> re(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i) {
        const Node& nd = nodes[i];
        if (nd.op == Op::leaf) {
            re[i] = nd.val;
            continue;
        }
        re[i] = eval_node(nd, [&re](int j) -> const Mat& { return re[j]; });
        if (!bit_equal(re[i], nd.val)) return false;
    }
    return true;
}

}  // namespace datlab
