#pragma once

#include <functional>
#include <vector>

#include "datlab/network.hpp"
#include "datlab/tape.hpp"

namespace datlab {

struct ParamNodes {
    int w = -1, b = -1;
};

struct GradientBundle {
    std::vector<Mat> dW, db;

    static GradientBundle zeros_like(const MlpNetwork& net);
    bool finite() const;
};

// One leaf per parameter matrix. Reuse the returned ids across several
// forward passes when they must share gradients (e.g. D on real and fake).
std::vector<ParamNodes> push_params(Tape& t, const MlpNetwork& net);

// Layer chain x·Wᵀ+b → act using existing parameter leaves.
int forward_with_params(Tape& t, const MlpNetwork& net, int x_node,
                        const std::vector<ParamNodes>& pn);

// push_params + forward_with_params; param node ids land in pn when given.
int forward_on_tape(Tape& t, const MlpNetwork& net, int x_node, std::vector<ParamNodes>* pn);

// Gradients of the scalar node `root` with respect to all parameters in pn.
GradientBundle grad_params(Tape& t, int root, const std::vector<ParamNodes>& pn,
                           const MlpNetwork& net);

// Builds a scalar from the network output; must return a 1x1 node.
using ScalarGraphFn = std::function<int(Tape&, int y)>;
GradientBundle grad_params(const MlpNetwork& net, const Mat& x, const ScalarGraphFn& fn);

// Per-row transform of the network output; must return a (batch x 1) node.
// Row i of the result is the gradient of fn(D(x_i)) with respect to x_i;
// any batch statistics baked into fn must enter as frozen constants.
using RowGraphFn = std::function<int(Tape&, int y)>;
Mat grad_input(const MlpNetwork& net, const Mat& x, const RowGraphFn& row_fn);

// ∇_θ of mean_i ||∇_{x_i} D(x_i)||² for a scalar-output network.
GradientBundle grad_params_of_input_grad_norm(const MlpNetwork& net, const Mat& x);

}  // namespace datlab
