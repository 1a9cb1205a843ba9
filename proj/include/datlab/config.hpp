#pragma once

#include <string>

#include "json.hpp"

#include "datlab/analysis.hpp"
#include "datlab/dat.hpp"
#include "datlab/gan.hpp"
#include "datlab/regularizers.hpp"

namespace datlab {

enum class DatasetKind { balanced9, imbalanced9 };

std::string dataset_name(DatasetKind d);
DatasetKind dataset_from_name(const std::string& s);

// Full description of one run. Parsing is strict: unknown or mistyped keys
// are configuration errors, and at most one of {regularizer, adversarial
// training} may be active.
struct ExperimentConfig {
    std::string run_id = "run";
    DatasetKind dataset = DatasetKind::balanced9;
    TrainConfig train;
    RegKind reg;
    PerturbConfig dat;
    int hidden_layers = 3;
    int hidden_width = 64;
    long long eval_every = 500;
    int eval_samples = 10000;
    int eval_grad_samples = 1024;
    AttackConfig attack;
    int attack_samples = 256;
    int lipschitz_pairs = 10000;
    std::string snapshot_networks = "final";  // "final" | "eval"
    std::string out_dir = "runs";             // not serialized; set by caller

    void check() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Every field resolved, suitable for echoing next to a run's outputs and for
// reproducing it exactly.
nlohmann::json config_to_json(const ExperimentConfig& c);

}  // namespace datlab
