#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datlab/activations.hpp"
#include "datlab/mat.hpp"

namespace datlab {

struct Layer {
    Mat W;  // out x in
    Mat b;  // 1 x out
    ActKind act = ActKind::identity;
};

struct MlpNetwork {
    std::vector<Layer> layers;

    int in_dim() const { return layers.front().W.cols; }
    int out_dim() const { return layers.back().W.rows; }

    // throws if layer dims don't chain or parameters are non-finite
    void check() const;
};

// dims = {in, hidden..., out}; acts has one entry per layer.
// Weights ~ Normal(0, init_std^2), biases 0, drawn in layer order.
MlpNetwork make_mlp(const std::vector<int>& dims, const std::vector<ActKind>& acts,
                    uint64_t seed, double init_std = 0.02);

// Convenience: hidden layers all `width` wide with `hidden` of them,
// leaky-relu hidden activations, identity output.
MlpNetwork make_mlp_default(int in, int out, int hidden, int width, uint64_t seed);

Mat mlp_forward(const MlpNetwork& net, const Mat& x);

// Structured text with hex-float parameters; round-trips losslessly.
void save_network(const MlpNetwork& net, const std::string& path);
MlpNetwork load_network(const std::string& path);

}  // namespace datlab
