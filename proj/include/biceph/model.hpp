#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "biceph/data.hpp"
#include "biceph/nn.hpp"
#include "biceph/triplet.hpp"

namespace biceph {

struct BicephConfig {
    std::size_t input_dim = 64;
    std::vector<std::size_t> backbone_hidden = {128};  // widths before flat_dim
    std::size_t flat_dim = 64;
    std::size_t embed_dim = 64;                        // F_Tr
    std::size_t num_classes = 2;                       // 2 or 3
    std::vector<std::size_t> concat_hidden = {32, 16, 8};
    double margin = 0.2;
    double triplet_weight = 1.0;  // weight of the triplet term in the total loss

    std::size_t prior_out() const { return num_classes == 2 ? 1 : 3; }
    std::size_t class_out() const { return num_classes == 2 ? 1 : 3; }
    void validate() const;
};

// Dense stack standing in for a convolutional feature extractor; its last
// layer plays the role of the flatten output the head attaches to.
class Backbone {
public:
    Backbone(std::size_t input_dim, const std::vector<std::size_t>& hidden,
             std::size_t flat_dim);

    Matrix forward(const Matrix& x);

    // Returns per-layer weight gradients (input-to-output order) and the
    // gradient at the network input.
    std::vector<Matrix> backward(const Matrix& grad_at_flat, Matrix* grad_at_input = nullptr);

    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::size_t flat_dim() const { return flat_dim_; }

private:
    std::vector<DenseLayer> layers_;
    std::size_t flat_dim_;
};

struct ForwardOutputs {
    Matrix embedding;    // B x F_Tr, unit rows
    Matrix prior;        // B x prior_out
    Matrix class_probs;  // B x class_out
};

struct HeadGrads {
    Matrix triplet_weight_grad;
    Matrix prior_weight_grad;
    std::vector<Matrix> concat_weight_grads;
    Matrix grad_at_flat;  // B x flat_dim
};

// The dual head: a triplet branch (dense to an L2-normalized embedding), a
// prior branch (dense to a class probability), and a concatenate branch
// classifying [embedding ; prior].
class BicephModule {
public:
    explicit BicephModule(const BicephConfig& config);

    ForwardOutputs forward(const Matrix& flat);

    // ce_grad_at_output is dL/d(logits) of the concatenate head (fused
    // cross-entropy); triplet_grad_at_embedding is dL/d(embedding), already
    // scaled by the triplet weight. The concat-head chain prefix splits at
    // the concatenation; the flat gradient is the sum of the two branches'
    // input gradients.
    HeadGrads backward(const Matrix& ce_grad_at_output,
                       const Matrix& triplet_grad_at_embedding);

    DenseLayer& triplet_dense() { return triplet_dense_; }
    DenseLayer& prior_dense() { return prior_dense_; }
    std::vector<DenseLayer>& concat_layers() { return concat_layers_; }
    const BicephConfig& config() const { return config_; }

private:
    BicephConfig config_;
    DenseLayer triplet_dense_;
    L2NormLayer l2_;
    DenseLayer prior_dense_;
    std::vector<DenseLayer> concat_layers_;
};

struct ModelGrads {
    std::vector<Matrix> weight_grads;  // aligned with BicephModel::parameters()
    Matrix grad_at_flat;
};

class BicephModel {
public:
    explicit BicephModel(const BicephConfig& config);

    // Draws every weight matrix in parameters() order from the "init" stream
    // of the given seed.
    void init_params(std::uint64_t seed);

    ForwardOutputs forward(const Matrix& x);
    ModelGrads backward(const Matrix& ce_grad_at_output,
                        const Matrix& triplet_grad_at_embedding);
    void apply_sgd(const ModelGrads& grads, double learning_rate);

    std::vector<Matrix*> parameters();
    std::vector<std::string> parameter_names() const;

    const BicephConfig& config() const { return config_; }
    Backbone& backbone() { return backbone_; }
    BicephModule& head() { return head_; }

private:
    BicephConfig config_;
    Backbone backbone_;
    BicephModule head_;
};

struct StepReport {
    double ce_loss = 0.0;
    double triplet_loss = 0.0;
    std::size_t n_triplets = 0;
};

// One forward pass, semi-hard mining on the embedding, combined backward of
// CE + triplet_weight * triplet loss, then a plain gradient-descent update.
StepReport train_step(BicephModel& model, const Batch& batch, double learning_rate);

struct SlicePrediction {
    std::int64_t subject_id = 0;
    std::size_t slice_index = 0;
    int true_class = 0;
    int predicted_class = 0;
    std::vector<double> probs;
    std::vector<double> embedding;
};

std::vector<SlicePrediction> predict_slices(BicephModel& model, const Cohort& cohort,
                                            const LabelMap& labels);

// Mean cross-entropy of the model over every slice of the cohort.
double cohort_ce_loss(BicephModel& model, const Cohort& cohort, const LabelMap& labels);

// ReduceLROnPlateau: after `patience` consecutive epochs without val-loss
// improvement the learning rate is multiplied by `factor`.
class PlateauSchedule {
public:
    PlateauSchedule(int patience, double factor) : patience_(patience), factor_(factor) {}

    // Returns true when the learning rate was reduced this observation.
    bool observe(double val_loss, double& learning_rate);

    double best() const { return best_; }
    int bad_epochs() const { return bad_; }
    void restore(double best, int bad) {
        best_ = best;
        bad_ = bad;
    }

private:
    int patience_;
    double factor_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_ = 0;
};

struct FitOptions {
    double learning_rate = 0.001;
    double lr_factor = 0.1;
    int patience = 5;
    int epochs = 100;
    SamplerConfig sampler;
    std::uint64_t seed = 1;
};

struct EpochStats {
    int epoch = 0;
    double learning_rate = 0.0;
    double train_ce = 0.0;
    double train_triplet = 0.0;
    std::size_t n_triplets = 0;
    double train_slice_acc = 0.0;
    double train_subject_acc = 0.0;
    double val_ce = 0.0;
    double val_slice_acc = 0.0;
    double val_subject_acc = 0.0;
};

// Mid-training state; checkpointing it makes resumption bit-identical.
struct FitState {
    int next_epoch = 1;
    double learning_rate = 0.001;
    double best_val_ce = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;
    std::array<std::uint64_t, 4> sampler_rng_state{};
};

struct TrainingLog {
    std::vector<EpochStats> epochs;  // row 0 is the pre-training evaluation
    int best_epoch = 0;
    double best_val_ce = 0.0;
    FitState final_state;
};

using EpochCallback =
    std::function<void(const EpochStats&, bool is_best, const FitState& state)>;

// Epoch loop of train_steps with per-epoch evaluation and the plateau
// schedule. Row 0 of the log is the untrained evaluation; `resume` continues
// an interrupted run exactly.
TrainingLog fit(BicephModel& model, const Cohort& train, const Cohort& val,
                const LabelMap& labels, const FitOptions& options,
                const FitState* resume = nullptr, const EpochCallback& on_epoch = nullptr);

}  // namespace biceph
