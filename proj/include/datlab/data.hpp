#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "datlab/mat.hpp"
#include "datlab/rng.hpp"

namespace datlab {

// 2-D Gaussian mixture benchmark. balanced9() is the 3x3 grid on {-1,0,1}^2
// with equal weights; imbalanced9() keeps the grid but shifts mass across the
// columns so the rightmost one dominates. Mode i sits at
// (means[i][0], means[i][1]) and i = 3*ix + iy with ix indexing the x
// coordinate and iy the y coordinate, both over {-1,0,1} in order.
struct MixtureSpec {
    std::vector<std::array<double, 2>> means;
    double variance = 0.1;
    std::vector<double> weights;

    static MixtureSpec balanced9();
    static MixtureSpec imbalanced9();
    void check() const;
};

Mat sample_mixture(const MixtureSpec& spec, int n, uint64_t seed);
Mat sample_mixture(const MixtureSpec& spec, int n, Rng& rng);
// Also reports which component each row was drawn from.
Mat sample_mixture_labeled(const MixtureSpec& spec, int n, Rng& rng, std::vector<int>& labels);

Mat sample_latent(int dim, int n, uint64_t seed);
Mat sample_latent(int dim, int n, Rng& rng);

// Mode-recovery statistics: a point is high quality when its squared distance
// to the nearest mode is at most 9x the mixture variance (ties break toward
// the lower mode index); a mode counts as covered when it claims at least 2%
// of all points as high quality.
struct ModeStats {
    int covered_modes = 0;
    double hq_fraction = 0.0;
    std::vector<double> mode_frequencies;  // hq count per mode / total points
    double tv_distance = 0.0;              // between hq assignment and spec weights
};

ModeStats mode_stats(const Mat& points, const MixtureSpec& spec);

struct Gauss2 {
    double mx = 0.0, my = 0.0;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
};

Gauss2 fit_gauss2(const Mat& points);
double frechet_from_moments(const Gauss2& a, const Gauss2& b);
// Frechet distance between Gaussian fits of two 2-D point clouds.
double frechet_2d(const Mat& a, const Mat& b);

}  // namespace datlab
