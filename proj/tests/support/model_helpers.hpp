#pragma once

// Shared helpers for whole-model tests: batch construction with subject
// structure, the composed scalar loss at fixed mined triples, and a manual
// layer-by-layer forward used both as a composition oracle and to measure
// ReLU kink proximity.

#include <vector>

#include "biceph/checkpoint.hpp"
#include "biceph/model.hpp"
#include "support/oracles.hpp"

namespace model_helpers {

using namespace biceph;

inline Batch random_batch(Rng& rng, std::size_t subjects, std::size_t slices_each,
                          std::size_t input_dim, std::size_t num_classes) {
    Batch b;
    b.x = oracles::random_matrix(rng, subjects * slices_each, input_dim, 1.5);
    for (std::size_t s = 0; s < subjects; ++s)
        for (std::size_t k = 0; k < slices_each; ++k) {
            b.subject_ids.push_back(static_cast<std::int64_t>(s));
            b.class_labels.push_back(static_cast<int>(s % num_classes));
        }
    return b;
}

// CE + triplet_weight * triplet over a FIXED triple set (mining is not
// differentiable, so finite differences hold the triples constant).
inline double composed_loss(BicephModel& model, const Batch& batch,
                            const TripletSet& triples) {
    ForwardOutputs out = model.forward(batch.x);
    const double ce = cross_entropy(out.class_probs, batch.class_labels).loss;
    EmbeddingBatch eb{out.embedding, batch.subject_ids, batch.class_labels};
    const double tl = triplet_loss(eb, triples, triples.margin_used).loss;
    return ce + model.config().triplet_weight * tl;
}

inline ModelGrads analytic_grads(BicephModel& model, const Batch& batch,
                                 const TripletSet& triples) {
    ForwardOutputs out = model.forward(batch.x);
    const CrossEntropyResult ce = cross_entropy(out.class_probs, batch.class_labels);
    EmbeddingBatch eb{out.embedding, batch.subject_ids, batch.class_labels};
    const TripletLossResult tl = triplet_loss(eb, triples, triples.margin_used);
    Matrix upstream = tl.grad * model.config().triplet_weight;
    return model.backward(ce.grad, upstream);
}

// Replays the forward pass by composing the individual layer forwards in
// declaration order; also reports the smallest |pre-activation| seen at any
// ReLU layer (for kink-avoidance redraws).
inline ForwardOutputs manual_forward(BicephModel& model, const Matrix& x,
                                     double* min_relu_pre = nullptr) {
    double min_pre = 1e300;
    const auto track = [&](const DenseLayer& layer, const Matrix& input) {
        if (layer.activation() != Activation::ReLU) return;
        Matrix xb(input.rows(), layer.in_dim() + 1);
        for (std::size_t r = 0; r < input.rows(); ++r) {
            for (std::size_t k = 0; k < layer.in_dim(); ++k) xb(r, k) = input(r, k);
            xb(r, layer.in_dim()) = 1.0;
        }
        const Matrix pre = matmul_bt(xb, layer.weights());
        for (std::size_t i = 0; i < pre.size(); ++i)
            min_pre = std::min(min_pre, std::fabs(pre.data()[i]));
    };

    Matrix cur = x;
    for (DenseLayer& layer : model.backbone().layers()) {
        track(layer, cur);
        cur = layer.forward(cur);
    }
    const Matrix flat = cur;

    L2NormLayer l2;
    ForwardOutputs out;
    out.embedding = l2.forward(model.head().triplet_dense().forward(flat));
    out.prior = model.head().prior_dense().forward(flat);

    Matrix concat(flat.rows(), out.embedding.cols() + out.prior.cols());
    for (std::size_t r = 0; r < flat.rows(); ++r) {
        for (std::size_t j = 0; j < out.embedding.cols(); ++j)
            concat(r, j) = out.embedding(r, j);
        for (std::size_t j = 0; j < out.prior.cols(); ++j)
            concat(r, out.embedding.cols() + j) = out.prior(r, j);
    }
    cur = concat;
    for (DenseLayer& layer : model.head().concat_layers()) {
        track(layer, cur);
        cur = layer.forward(cur);
    }
    out.class_probs = cur;
    if (min_relu_pre) *min_relu_pre = min_pre;
    return out;
}

// Smallest |d(a,p) - d(a,n) + margin| over the mined triples: hinge kink
// proximity at the evaluation point.
inline double min_hinge_slack(const EmbeddingBatch& eb, const TripletSet& triples) {
    const Matrix d = pairwise_distances(eb);
    double slack = 1e300;
    for (const Triple& t : triples.triples)
        slack = std::min(slack, std::fabs(d(t.anchor, t.positive) -
                                          d(t.anchor, t.negative) + triples.margin_used));
    return slack;
}

struct RandomCase {
    BicephModel model;
    Batch batch;
    TripletSet triples;
};

// Draws a small random configuration whose composed loss is smooth at the
// evaluation point: at least one mined triple, hinges and ReLU
// pre-activations clear of their kinks.
inline RandomCase smooth_random_case(std::uint64_t seed, bool multiclass_allowed = true) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng(seed * 1000003 + attempt);
        BicephConfig cfg;
        cfg.input_dim = 3 + rng.below(14);
        cfg.backbone_hidden = {3 + rng.below(14)};
        cfg.flat_dim = 3 + rng.below(14);
        cfg.embed_dim = 2 + rng.below(15);
        cfg.num_classes = (multiclass_allowed && rng.below(2) == 1) ? 3 : 2;
        cfg.concat_hidden = {2 + rng.below(15), 2 + rng.below(15)};
        cfg.margin = 0.2 + 0.8 * rng.next_unit();
        cfg.triplet_weight = 0.5 + rng.next_unit();

        const std::size_t subjects = 2 + rng.below(3);
        const std::size_t slices_each = 2;
        if (subjects * slices_each > 8) continue;

        RandomCase c{BicephModel(cfg),
                     random_batch(rng, subjects, slices_each, cfg.input_dim,
                                  cfg.num_classes),
                     TripletSet{}};
        c.model.init_params(seed * 77 + attempt);

        double min_pre = 0.0;
        ForwardOutputs out = manual_forward(c.model, c.batch.x, &min_pre);
        if (min_pre < 1e-3) continue;

        EmbeddingBatch eb{out.embedding, c.batch.subject_ids, c.batch.class_labels};
        c.triples = mine_semihard(eb, MiningConfig{cfg.margin});
        if (c.triples.triples.empty()) continue;
        if (min_hinge_slack(eb, c.triples) < 1e-3) continue;
        return c;
    }
}

}  // namespace model_helpers
