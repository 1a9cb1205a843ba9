#pragma once

#include <cstdint>
#include <vector>

#include "datlab/activations.hpp"
#include "datlab/errors.hpp"
#include "datlab/losses.hpp"
#include "datlab/mat.hpp"

namespace datlab {

// Matrix-level primitives. Every node is evaluated eagerly when pushed, so
// node values are always available. backward() RECORDS the adjoint
// computation as new tape nodes, which is what makes nested differentiation
// (gradients of input-gradient norms with respect to parameters) work: the
// second backward pass simply differentiates through the nodes the first
// one emitted.
enum class Op : uint8_t {
    leaf,
    matmul,      // op_a(A) * op_b(B) with transpose flags ta/tb
    add, sub, hadamard, divide,
    scale_,      // s * A
    add_scalar_, // A + s
    add_rowvec,  // A + broadcast(b), b is 1 x cols
    act,         // f(A)
    act_deriv,   // f'(A), piecewise-constant activations only
    abs_, sign_, sqrt_,
    gfun,        // g(A), loss transform selected by (LossKind, GSide)
    gfun_prime,  // g'(A)
    gfun_second, // g''(A)
    sum_all_,    // 1x1
    row_sum_,    // rows x 1
    col_sum_,    // 1 x cols
    bc_scalar,   // 1x1 -> r x c
    bc_col,      // rows x 1 -> rows x c
    bc_row,      // 1 x cols -> r x cols
};

struct Node {
    Op op = Op::leaf;
    int a = -1, b = -1;
    double s = 0.0;
    bool ta = false, tb = false;
    ActKind akind = ActKind::identity;
    LossKind lkind = LossKind::vanilla;
    GSide lside = GSide::real;
    int r = 0, c = 0;  // broadcast target shape
    Mat val;
};

struct Tape {
    std::vector<Node> nodes;

    Tape() { nodes.reserve(256); }

    int size() const { return static_cast<int>(nodes.size()); }
    const Mat& val(int i) const { return nodes[i].val; }

    int leaf(Mat v);
    int matmul(int a, int b, bool ta = false, bool tb = false);
    int add(int a, int b);
    int sub(int a, int b);
    int hadamard(int a, int b);
    int divide(int a, int b);
    int scale(int a, double s);
    int add_scalar(int a, double s);
    int add_rowvec(int a, int b);
    int act(int a, ActKind k);
    int act_deriv_of(int a, ActKind k);
    int abs_of(int a);
    int sign_of(int a);
    int sqrt_of(int a);
    int gfun_of(int a, LossKind k, GSide side);
    int gfun_prime_of(int a, LossKind k, GSide side);
    int gfun_second_of(int a, LossKind k, GSide side);
    int sum_all(int a);
    int row_sum(int a);
    int col_sum(int a);
    int bcast_scalar(int a, int rows, int cols);
    int bcast_col(int a, int cols);
    int bcast_row(int a, int rows);

    // composites
    int mean_all(int a);     // sum / element count
    int row_norm_sq(int a);  // rows x 1
    int row_norm(int a);     // rows x 1

    // Reverse pass from a 1x1 root. Returns, for each id in wrt, the node id
    // holding its adjoint, or -1 when the root does not depend on it. The
    // adjoint computation is itself recorded on the tape.
    std::vector<int> backward(int root, const std::vector<int>& wrt);

    // Adjoint value, or a zero matrix shaped like wrt when adj_id == -1.
    Mat grad_or_zero(int adj_id, int wrt_id) const;

    // Re-executes every recorded node from the leaves; true iff all
    // recomputed values are bit-identical to the stored ones.
    bool replay_check() const;

private:
    int push(Node nd);
};

}  // namespace datlab
