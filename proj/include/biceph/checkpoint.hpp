#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "biceph/data.hpp"
#include "biceph/model.hpp"

namespace biceph {

enum class Task { CNvsAD, MCIvsAD, CNvsMCIvsAD };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

// Ordered task classes; in binary tasks index 1 is the disease (positive)
// class.
LabelMap label_map_for_task(Task t);

struct SplitFractions {
    double train_frac = 0.8;
    double test_frac = 0.2;
    double val_frac_of_train = 0.2;
};

struct ExperimentConfig {
    std::string cohort_path;                // one of cohort_path / synthetic
    std::optional<SyntheticSpec> synthetic;
    Task task = Task::CNvsAD;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    SplitFractions split;
    SamplerConfig sampler;  // defaults 10 x 8 = batch 80
    BicephConfig model;     // input_dim / num_classes resolved at train time
    double learning_rate = 0.001;
    double lr_factor = 0.1;
    int patience = 5;
    int epochs = 100;
};

ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_json(const ExperimentConfig& config);
ExperimentConfig parse_experiment_config(const std::string& text);

struct Checkpoint {
    int format_version = 1;
    std::int64_t created_unix = 0;  // excluded from the determinism contract
    ExperimentConfig config;        // resolved snapshot
    int epoch = 0;
    FitState state;
    std::vector<std::pair<std::string, Matrix>> parameters;
};

Checkpoint make_checkpoint(const ExperimentConfig& config, BicephModel& model, int epoch,
                           const FitState& state);

std::string checkpoint_json(const Checkpoint& cp);
void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the model and overwrites its parameters from the snapshot.
BicephModel restore_model(const Checkpoint& cp);

// Serialized size with every parameter array emptied: the fixed cost the
// format adds on top of the raw weights.
std::uint64_t checkpoint_envelope_bytes(const Checkpoint& cp);

}  // namespace biceph
