#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "datlab/config.hpp"
#include "datlab/data.hpp"

namespace datlab {

MixtureSpec dataset_spec(DatasetKind d);

// rng stream tags fanned out from a run's master seed with derive_seed
namespace streams {
inline constexpr uint64_t init_g = 1, init_d = 2, data = 3, latent = 4, penalty = 5,
                          eval_data = 6, eval_latent = 7, lipschitz = 8;
}  // namespace streams

struct RunResult {
    bool ok = true;
    long long last_iteration = 0;
    std::string error;
    std::string dir;
    nlohmann::json final;      // last metrics row plus run-level averages
    nlohmann::json attack;    // final attack report
    nlohmann::json lipschitz; // final Lipschitz report
};

// Trains per the config and persists config echo, metrics stream, network
// snapshots, point clouds, and final attack/Lipschitz reports under
// out_dir/run_id. Numeric blow-up marks the run failed but keeps partial
// outputs.
RunResult run_experiment(const ExperimentConfig& cfg);

struct GridAxes {
    std::vector<std::string> losses;   // default vanilla, lsgan, wgan
    std::vector<std::string> regs;     // default none, gp, lp, zero_gp, dat, datt
    std::vector<uint64_t> seeds;       // default 1, 2, 3
};

struct GridResult {
    std::string dir;
    nlohmann::json cells;    // one record per executed cell
    nlohmann::json summary;  // per-(loss, variant) medians over seeds
};

// Runs every loss x variant x seed cell in isolation; a failed cell is
// recorded but never aborts the sweep.
GridResult run_grid(const ExperimentConfig& base, const GridAxes& axes = {});

// Copies base and activates one training variant by name: "none", "gp",
// "lp", "zero_gp", "dat", or "datt". Shared by grids and ablations.
ExperimentConfig apply_variant(const ExperimentConfig& base, const std::string& variant);

std::vector<double> epsilon_sweep_axis();         // nine default strengths
std::vector<int> step_sweep_axis();               // 1..5
std::vector<std::string> position_sweep_axis();   // five position variants

struct AblationAxes {
    std::vector<double> epsilons;        // empty = default axis
    std::vector<int> steps;              // empty = default axis
    std::vector<std::string> positions;  // empty = default axis
    std::vector<uint64_t> seeds;         // empty = {base seed, base seed + 1}
};

struct AblationResult {
    std::string dir;
    nlohmann::json points;  // per-point medians with the per-seed records
};

// kind is one of epsilon_sweep, step_sweep, position_sweep.
AblationResult run_ablation(const std::string& kind, const ExperimentConfig& base,
                            const AblationAxes& axes = {});

double median(std::vector<double> v);  // empty input is a usage error

}  // namespace datlab
