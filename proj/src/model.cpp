#include "biceph/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "biceph/eval.hpp"

namespace biceph {

void BicephConfig::validate() const {
    if (input_dim == 0 || flat_dim == 0) throw ValidationError("config: zero dimension");
    if (embed_dim < 2) throw ValidationError("config: embed_dim must be >= 2");
    if (num_classes != 2 && num_classes != 3)
        throw ValidationError("config: num_classes must be 2 or 3");
    if (!(margin > 0.0) || !std::isfinite(margin))
        throw ValidationError("config: margin must be positive");
    if (!(triplet_weight >= 0.0) || !std::isfinite(triplet_weight))
        throw ValidationError("config: triplet_weight must be >= 0");
    for (std::size_t w : concat_hidden)
        if (w == 0) throw ValidationError("config: zero concat hidden width");
    for (std::size_t w : backbone_hidden)
        if (w == 0) throw ValidationError("config: zero backbone hidden width");
}

Backbone::Backbone(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                   std::size_t flat_dim)
    : flat_dim_(flat_dim) {
    std::size_t prev = input_dim;
    for (std::size_t w : hidden) {
        layers_.emplace_back(prev, w, Activation::ReLU);
        prev = w;
    }
    layers_.emplace_back(prev, flat_dim, Activation::ReLU);
}

Matrix Backbone::forward(const Matrix& x) {
    Matrix cur = x;
    for (DenseLayer& layer : layers_) cur = layer.forward(cur);
    return cur;
}

std::vector<Matrix> Backbone::backward(const Matrix& grad_at_flat, Matrix* grad_at_input) {
    std::vector<Matrix> weight_grads(layers_.size());
    Matrix upstream = grad_at_flat;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        DenseGrad g = layers_[i].backward(upstream);
        weight_grads[i] = std::move(g.weight_grad);
        upstream = std::move(g.input_grad);
    }
    if (grad_at_input) *grad_at_input = std::move(upstream);
    return weight_grads;
}

namespace {

Activation head_output_activation(const BicephConfig& c) {
    return c.num_classes == 2 ? Activation::Sigmoid : Activation::Softmax;
}

std::vector<DenseLayer> make_concat_layers(const BicephConfig& c) {
    std::vector<DenseLayer> layers;
    std::size_t prev = c.embed_dim + c.prior_out();
    for (std::size_t w : c.concat_hidden) {
        layers.emplace_back(prev, w, Activation::ReLU);
        prev = w;
    }
    layers.emplace_back(prev, c.class_out(), head_output_activation(c));
    return layers;
}

}  // namespace

BicephModule::BicephModule(const BicephConfig& config)
    : config_(config),
      triplet_dense_(config.flat_dim, config.embed_dim, Activation::Identity),
      prior_dense_(config.flat_dim, config.prior_out(), head_output_activation(config)),
      concat_layers_(make_concat_layers(config)) {}

ForwardOutputs BicephModule::forward(const Matrix& flat) {
    if (flat.cols() != config_.flat_dim)
        throw ShapeError("biceph forward: flat width mismatch");

    ForwardOutputs out;
    out.embedding = l2_.forward(triplet_dense_.forward(flat));
    out.prior = prior_dense_.forward(flat);

    // Concatenation order is fixed: embedding first, prior second.
    Matrix concat(flat.rows(), config_.embed_dim + config_.prior_out());
    for (std::size_t r = 0; r < flat.rows(); ++r) {
        std::copy(out.embedding.row_ptr(r), out.embedding.row_ptr(r) + config_.embed_dim,
                  concat.row_ptr(r));
        std::copy(out.prior.row_ptr(r), out.prior.row_ptr(r) + config_.prior_out(),
                  concat.row_ptr(r) + config_.embed_dim);
    }

    Matrix cur = std::move(concat);
    for (DenseLayer& layer : concat_layers_) cur = layer.forward(cur);
    out.class_probs = std::move(cur);
    return out;
}

HeadGrads BicephModule::backward(const Matrix& ce_grad_at_output,
                                 const Matrix& triplet_grad_at_embedding) {
    HeadGrads grads;
    grads.concat_weight_grads.resize(concat_layers_.size());

    // Concatenate branch: the output layer consumes the fused logit
    // gradient, the hidden layers chain normally. The surviving input
    // gradient is the Q prefix.
    Matrix upstream;
    for (std::size_t i = concat_layers_.size(); i-- > 0;) {
        DenseGrad g = (i + 1 == concat_layers_.size())
                          ? concat_layers_[i].backward_preactivation(ce_grad_at_output)
                          : concat_layers_[i].backward(upstream);
        grads.concat_weight_grads[i] = std::move(g.weight_grad);
        upstream = std::move(g.input_grad);
    }

    // Q splits at the concatenation into the embedding and prior slices.
    const std::size_t batch = upstream.rows();
    Matrix q_embed(batch, config_.embed_dim);
    Matrix q_prior(batch, config_.prior_out());
    for (std::size_t r = 0; r < batch; ++r) {
        std::copy(upstream.row_ptr(r), upstream.row_ptr(r) + config_.embed_dim,
                  q_embed.row_ptr(r));
        std::copy(upstream.row_ptr(r) + config_.embed_dim,
                  upstream.row_ptr(r) + config_.embed_dim + config_.prior_out(),
                  q_prior.row_ptr(r));
    }

    // Triplet branch: triplet-loss gradient plus the concat-head share.
    require_shape(triplet_grad_at_embedding, batch, config_.embed_dim,
                  "biceph backward triplet gradient");
    Matrix embed_upstream = q_embed + triplet_grad_at_embedding;
    DenseGrad tg = triplet_dense_.backward(l2_.backward(embed_upstream));
    grads.triplet_weight_grad = std::move(tg.weight_grad);

    // Prior branch: only the concat-head share flows here.
    DenseGrad pg = prior_dense_.backward(q_prior);
    grads.prior_weight_grad = std::move(pg.weight_grad);

    grads.grad_at_flat = tg.input_grad + pg.input_grad;
    return grads;
}

BicephModel::BicephModel(const BicephConfig& config)
    : config_((config.validate(), config)),
      backbone_(config.input_dim, config.backbone_hidden, config.flat_dim),
      head_(config) {}

void BicephModel::init_params(std::uint64_t seed) {
    Rng rng = Rng::stream(seed, "init");
    for (DenseLayer& layer : backbone_.layers()) layer.init_weights(rng);
    head_.triplet_dense().init_weights(rng);
    head_.prior_dense().init_weights(rng);
    for (DenseLayer& layer : head_.concat_layers()) layer.init_weights(rng);
}

ForwardOutputs BicephModel::forward(const Matrix& x) {
    return head_.forward(backbone_.forward(x));
}

ModelGrads BicephModel::backward(const Matrix& ce_grad_at_output,
                                 const Matrix& triplet_grad_at_embedding) {
    HeadGrads hg = head_.backward(ce_grad_at_output, triplet_grad_at_embedding);

    ModelGrads grads;
    grads.grad_at_flat = hg.grad_at_flat;
    grads.weight_grads = backbone_.backward(hg.grad_at_flat);
    grads.weight_grads.push_back(std::move(hg.triplet_weight_grad));
    grads.weight_grads.push_back(std::move(hg.prior_weight_grad));
    for (Matrix& m : hg.concat_weight_grads) grads.weight_grads.push_back(std::move(m));
    return grads;
}

void BicephModel::apply_sgd(const ModelGrads& grads, double learning_rate) {
    std::vector<Matrix*> params = parameters();
    if (grads.weight_grads.size() != params.size())
        throw ShapeError("apply_sgd: gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& w = *params[i];
        const Matrix& g = grads.weight_grads[i];
        if (!w.same_shape(g)) throw ShapeError("apply_sgd: gradient shape mismatch");
        for (std::size_t j = 0; j < w.size(); ++j)
            w.data()[j] -= learning_rate * g.data()[j];
    }
}

std::vector<Matrix*> BicephModel::parameters() {
    std::vector<Matrix*> params;
    for (DenseLayer& layer : backbone_.layers()) params.push_back(&layer.weights());
    params.push_back(&head_.triplet_dense().weights());
    params.push_back(&head_.prior_dense().weights());
    for (DenseLayer& layer : head_.concat_layers()) params.push_back(&layer.weights());
    return params;
}

std::vector<std::string> BicephModel::parameter_names() const {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < backbone_.layers().size(); ++i)
        names.push_back("backbone." + std::to_string(i));
    names.push_back("triplet.dense");
    names.push_back("prior.dense");
    for (std::size_t i = 0; i < head_.config().concat_hidden.size() + 1; ++i)
        names.push_back("concat." + std::to_string(i));
    return names;
}

StepReport train_step(BicephModel& model, const Batch& batch, double learning_rate) {
    const BicephConfig& cfg = model.config();
    require_finite(batch.x, "train step batch");

    ForwardOutputs out;
    TripletSet mined;
    TripletLossResult tl;
    CrossEntropyResult ce;
    try {
        out = model.forward(batch.x);
        EmbeddingBatch eb{out.embedding, batch.subject_ids, batch.class_labels};
        mined = mine_semihard(eb, MiningConfig{cfg.margin});
        tl = triplet_loss(eb, mined, cfg.margin);
        ce = cross_entropy(out.class_probs, batch.class_labels);
    } catch (const ValidationError& e) {
        // The batch was finite on entry, so a non-finite signal mid-step
        // means the parameters blew up.
        throw TrainingError(std::string("train step diverged: ") + e.what());
    } catch (const DegenerateInputError& e) {
        throw TrainingError(std::string("train step diverged: ") + e.what());
    }

    if (!std::isfinite(ce.loss) || !std::isfinite(tl.loss))
        throw TrainingError("train step diverged: ce=" + std::to_string(ce.loss) +
                            " triplet=" + std::to_string(tl.loss));

    Matrix triplet_upstream = tl.grad * cfg.triplet_weight;
    ModelGrads grads = model.backward(ce.grad, triplet_upstream);
    model.apply_sgd(grads, learning_rate);

    return StepReport{ce.loss, tl.loss, mined.triples.size()};
}

std::vector<SlicePrediction> predict_slices(BicephModel& model, const Cohort& cohort,
                                            const LabelMap& labels) {
    std::vector<SlicePrediction> preds;
    preds.reserve(cohort.slice_count());
    for (const Subject& subj : cohort.subjects) {
        const int true_class = labels.index_of(subj.class_label);
        if (true_class < 0)
            throw ValidationError("predict: cohort contains a class outside the task");
        Matrix x(subj.slices.size(), cohort.input_dim);
        for (std::size_t s = 0; s < subj.slices.size(); ++s)
            std::copy(subj.slices[s].begin(), subj.slices[s].end(), x.row_ptr(s));
        ForwardOutputs out = model.forward(x);
        for (std::size_t s = 0; s < subj.slices.size(); ++s) {
            SlicePrediction p;
            p.subject_id = subj.id;
            p.slice_index = s;
            p.true_class = true_class;
            p.probs.assign(out.class_probs.row_ptr(s),
                           out.class_probs.row_ptr(s) + out.class_probs.cols());
            p.embedding.assign(out.embedding.row_ptr(s),
                               out.embedding.row_ptr(s) + out.embedding.cols());
            p.predicted_class = predicted_class_from_probs(p.probs);
            preds.push_back(std::move(p));
        }
    }
    return preds;
}

double cohort_ce_loss(BicephModel& model, const Cohort& cohort, const LabelMap& labels) {
    if (cohort.subjects.empty()) throw ValidationError("cohort loss: empty cohort");
    double total = 0.0;
    std::size_t rows = 0;
    for (const Subject& subj : cohort.subjects) {
        const int true_class = labels.index_of(subj.class_label);
        if (true_class < 0)
            throw ValidationError("cohort loss: cohort contains a class outside the task");
        Matrix x(subj.slices.size(), cohort.input_dim);
        for (std::size_t s = 0; s < subj.slices.size(); ++s)
            std::copy(subj.slices[s].begin(), subj.slices[s].end(), x.row_ptr(s));
        ForwardOutputs out = model.forward(x);
        std::vector<int> y(subj.slices.size(), true_class);
        total += cross_entropy(out.class_probs, y).loss * static_cast<double>(y.size());
        rows += y.size();
    }
    return total / static_cast<double>(rows);
}

bool PlateauSchedule::observe(double val_loss, double& learning_rate) {
    if (val_loss < best_) {
        best_ = val_loss;
        bad_ = 0;
        return false;
    }
    if (++bad_ >= patience_) {
        learning_rate *= factor_;
        bad_ = 0;
        return true;
    }
    return false;
}

namespace {

struct EvalSnapshot {
    double ce = 0.0;
    double slice_acc = 0.0;
    double subject_acc = 0.0;
};

EvalSnapshot evaluate(BicephModel& model, const Cohort& cohort, const LabelMap& labels) {
    EvalSnapshot snap;
    const std::vector<SlicePrediction> preds = predict_slices(model, cohort, labels);
    snap.slice_acc = slice_accuracy(preds);
    snap.subject_acc =
        subject_accuracy(aggregate_by_subject(preds, labels.num_classes()));
    snap.ce = cohort_ce_loss(model, cohort, labels);
    return snap;
}

void check_disjoint_subjects(const Cohort& a, const Cohort& b) {
    std::set<std::int64_t> ids;
    for (const Subject& s : a.subjects) ids.insert(s.id);
    for (const Subject& s : b.subjects)
        if (ids.count(s.id))
            throw ValidationError("fit: subject " + std::to_string(s.id) +
                                  " appears in both train and val");
}

}  // namespace

TrainingLog fit(BicephModel& model, const Cohort& train, const Cohort& val,
                const LabelMap& labels, const FitOptions& options, const FitState* resume,
                const EpochCallback& on_epoch) {
    if (train.subjects.empty() || val.subjects.empty())
        throw ValidationError("fit: empty cohort");
    check_disjoint_subjects(train, val);
    if (options.epochs < 0) throw ValidationError("fit: epochs must be >= 0");

    const std::size_t batch_size = options.sampler.batch_size();
    const std::size_t steps_per_epoch =
        std::max<std::size_t>(1, (train.slice_count() + batch_size - 1) / batch_size);

    Rng sampler_rng = Rng::stream(options.seed, "sampling");
    double lr = options.learning_rate;
    PlateauSchedule schedule(options.patience, options.lr_factor);
    int start_epoch = 1;

    TrainingLog log;
    if (resume) {
        start_epoch = resume->next_epoch;
        lr = resume->learning_rate;
        schedule.restore(resume->best_val_ce, resume->bad_epochs);
        sampler_rng.set_state(resume->sampler_rng_state);
        log.best_val_ce = resume->best_val_ce;
    } else {
        // Epoch 0: evaluation of the untrained model.
        const EvalSnapshot tr = evaluate(model, train, labels);
        const EvalSnapshot va = evaluate(model, val, labels);
        EpochStats row;
        row.epoch = 0;
        row.learning_rate = lr;
        row.train_ce = tr.ce;
        row.train_slice_acc = tr.slice_acc;
        row.train_subject_acc = tr.subject_acc;
        row.val_ce = va.ce;
        row.val_slice_acc = va.slice_acc;
        row.val_subject_acc = va.subject_acc;
        log.epochs.push_back(row);
        log.best_val_ce = std::numeric_limits<double>::infinity();
        if (on_epoch) {
            FitState st{1, lr, schedule.best(), schedule.bad_epochs(), sampler_rng.state()};
            on_epoch(row, false, st);
        }
    }

    log.best_epoch = 0;
    for (int epoch = start_epoch; epoch <= options.epochs; ++epoch) {
        EpochStats row;
        row.epoch = epoch;
        row.learning_rate = lr;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            const Batch batch = sample_batch(train, options.sampler, labels, sampler_rng);
            const StepReport report = train_step(model, batch, lr);
            row.train_ce += report.ce_loss;
            row.train_triplet += report.triplet_loss;
            row.n_triplets += report.n_triplets;
        }
        row.train_ce /= static_cast<double>(steps_per_epoch);
        row.train_triplet /= static_cast<double>(steps_per_epoch);

        const EvalSnapshot tr = evaluate(model, train, labels);
        const EvalSnapshot va = evaluate(model, val, labels);
        row.train_slice_acc = tr.slice_acc;
        row.train_subject_acc = tr.subject_acc;
        row.val_ce = va.ce;
        row.val_slice_acc = va.slice_acc;
        row.val_subject_acc = va.subject_acc;

        const bool is_best = va.ce < log.best_val_ce;
        if (is_best) {
            log.best_val_ce = va.ce;
            log.best_epoch = epoch;
        }
        schedule.observe(va.ce, lr);
        log.epochs.push_back(row);

        FitState st{epoch + 1, lr, schedule.best(), schedule.bad_epochs(),
                    sampler_rng.state()};
        log.final_state = st;
        if (on_epoch) on_epoch(row, is_best, st);
    }
    if (log.epochs.empty() || options.epochs < start_epoch) {
        log.final_state = FitState{start_epoch, lr, schedule.best(), schedule.bad_epochs(),
                                   sampler_rng.state()};
    }
    return log;
}

}  // namespace biceph
