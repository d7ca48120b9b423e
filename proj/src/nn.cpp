#include "biceph/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace biceph {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::ReLU: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softmax: return "softmax";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "relu") return Activation::ReLU;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "softmax") return Activation::Softmax;
    throw ValidationError("unknown activation: " + name);
}

Matrix apply_activation(Activation act, const Matrix& pre) {
    Matrix out = pre;
    switch (act) {
        case Activation::Identity:
            break;
        case Activation::ReLU:
            for (std::size_t i = 0; i < out.size(); ++i)
                out.data()[i] = std::max(0.0, out.data()[i]);
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < out.size(); ++i)
                out.data()[i] = 1.0 / (1.0 + std::exp(-out.data()[i]));
            break;
        case Activation::Softmax:
            for (std::size_t r = 0; r < out.rows(); ++r) {
                double* row = out.row_ptr(r);
                double mx = row[0];
                for (std::size_t j = 1; j < out.cols(); ++j) mx = std::max(mx, row[j]);
                double sum = 0.0;
                for (std::size_t j = 0; j < out.cols(); ++j) {
                    row[j] = std::exp(row[j] - mx);
                    sum += row[j];
                }
                for (std::size_t j = 0; j < out.cols(); ++j) row[j] /= sum;
            }
            break;
    }
    return out;
}

Matrix activation_backward(Activation act, const Matrix& upstream, const Matrix& pre,
                           const Matrix& out) {
    if (!upstream.same_shape(pre)) throw ShapeError("activation_backward: shape mismatch");
    Matrix delta = upstream;
    switch (act) {
        case Activation::Identity:
            break;
        case Activation::ReLU:
            for (std::size_t i = 0; i < delta.size(); ++i)
                if (pre.data()[i] <= 0.0) delta.data()[i] = 0.0;
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < delta.size(); ++i)
                delta.data()[i] *= out.data()[i] * (1.0 - out.data()[i]);
            break;
        case Activation::Softmax:
            for (std::size_t r = 0; r < delta.rows(); ++r) {
                const double* u = upstream.row_ptr(r);
                const double* o = out.row_ptr(r);
                double dot = 0.0;
                for (std::size_t j = 0; j < delta.cols(); ++j) dot += u[j] * o[j];
                double* d = delta.row_ptr(r);
                for (std::size_t j = 0; j < delta.cols(); ++j) d[j] = o[j] * (u[j] - dot);
            }
            break;
    }
    return delta;
}

DenseLayer::DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation act)
    : in_dim_(in_dim), out_dim_(out_dim), act_(act), weights_(out_dim, in_dim + 1) {
    if (in_dim == 0 || out_dim == 0) throw ValidationError("dense layer: zero dimension");
}

void DenseLayer::init_weights(Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in_dim_ + out_dim_));
    for (std::size_t i = 0; i < weights_.size(); ++i)
        weights_.data()[i] = bound * (2.0 * rng.next_unit() - 1.0);
}

Matrix DenseLayer::forward(const Matrix& x) {
    if (x.cols() != in_dim_) throw ShapeError("dense forward: input width mismatch");
    require_finite(x, "dense forward input");

    Matrix xb(x.rows(), in_dim_ + 1);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::copy(x.row_ptr(r), x.row_ptr(r) + in_dim_, xb.row_ptr(r));
        xb(r, in_dim_) = 1.0;
    }
    Matrix pre = matmul_bt(xb, weights_);
    Matrix out = apply_activation(act_, pre);

    cached_xb_ = std::move(xb);
    cached_pre_ = std::move(pre);
    cached_out_ = out;
    has_cache_ = true;
    return out;
}

DenseGrad DenseLayer::backward_from_delta(const Matrix& delta) const {
    DenseGrad g;
    g.weight_grad = matmul_at(delta, cached_xb_);  // out x (in+1), batch-summed
    g.input_grad = Matrix(delta.rows(), in_dim_);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
        const double* d = delta.row_ptr(r);
        double* gi = g.input_grad.row_ptr(r);
        for (std::size_t o = 0; o < out_dim_; ++o) {
            const double* wrow = weights_.row_ptr(o);
            const double dv = d[o];
            for (std::size_t j = 0; j < in_dim_; ++j) gi[j] += dv * wrow[j];
        }
    }
    return g;
}

DenseGrad DenseLayer::backward(const Matrix& upstream) const {
    if (!has_cache_) throw StateError("dense backward: forward cache missing");
    require_shape(upstream, cached_pre_.rows(), out_dim_, "dense backward upstream");
    return backward_from_delta(activation_backward(act_, upstream, cached_pre_, cached_out_));
}

DenseGrad DenseLayer::backward_preactivation(const Matrix& delta) const {
    if (!has_cache_) throw StateError("dense backward: forward cache missing");
    require_shape(delta, cached_pre_.rows(), out_dim_, "dense backward delta");
    return backward_from_delta(delta);
}

void DenseLayer::clear_cache() {
    cached_xb_ = Matrix();
    cached_pre_ = Matrix();
    cached_out_ = Matrix();
    has_cache_ = false;
}

Matrix L2NormLayer::forward(const Matrix& x) {
    require_finite(x, "l2 normalize input");
    Matrix out = x;
    cached_norms_.assign(x.rows(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* row = x.row_ptr(r);
        double sq = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) sq += row[j] * row[j];
        const double norm = std::sqrt(sq);
        if (norm <= kEpsilonNorm)
            throw DegenerateInputError("l2 normalize: row norm below epsilon");
        cached_norms_[r] = norm;
        double* orow = out.row_ptr(r);
        for (std::size_t j = 0; j < x.cols(); ++j) orow[j] = row[j] / norm;
    }
    cached_out_ = out;
    has_cache_ = true;
    return out;
}

Matrix L2NormLayer::backward(const Matrix& upstream) const {
    if (!has_cache_) throw StateError("l2 backward: forward cache missing");
    require_shape(upstream, cached_out_.rows(), cached_out_.cols(), "l2 backward upstream");
    Matrix grad(upstream.rows(), upstream.cols());
    for (std::size_t r = 0; r < upstream.rows(); ++r) {
        const double* u = upstream.row_ptr(r);
        const double* y = cached_out_.row_ptr(r);
        double dot = 0.0;
        for (std::size_t j = 0; j < upstream.cols(); ++j) dot += u[j] * y[j];
        double* g = grad.row_ptr(r);
        const double inv = 1.0 / cached_norms_[r];
        for (std::size_t j = 0; j < upstream.cols(); ++j) g[j] = (u[j] - dot * y[j]) * inv;
    }
    return grad;
}

void L2NormLayer::clear_cache() {
    cached_out_ = Matrix();
    cached_norms_.clear();
    has_cache_ = false;
}

CrossEntropyResult cross_entropy(const Matrix& probabilities, const std::vector<int>& labels) {
    if (labels.size() != probabilities.rows())
        throw ShapeError("cross_entropy: one label per row required");
    const std::size_t batch = probabilities.rows();
    if (batch == 0) throw ValidationError("cross_entropy: empty batch");
    const double inv_batch = 1.0 / static_cast<double>(batch);
    const double tiny = std::numeric_limits<double>::min();

    CrossEntropyResult res;
    res.loss = 0.0;
    res.grad = Matrix(batch, probabilities.cols());

    if (probabilities.cols() == 1) {
        for (std::size_t r = 0; r < batch; ++r) {
            const int t = labels[r];
            if (t != 0 && t != 1) throw ValidationError("cross_entropy: binary label out of range");
            const double p = probabilities(r, 0);
            res.loss += (t == 1) ? -std::log(std::max(p, tiny))
                                 : -std::log(std::max(1.0 - p, tiny));
            res.grad(r, 0) = (p - static_cast<double>(t)) * inv_batch;
        }
    } else {
        for (std::size_t r = 0; r < batch; ++r) {
            const int t = labels[r];
            if (t < 0 || static_cast<std::size_t>(t) >= probabilities.cols())
                throw ValidationError("cross_entropy: label out of range");
            res.loss += -std::log(std::max(probabilities(r, static_cast<std::size_t>(t)), tiny));
            for (std::size_t j = 0; j < probabilities.cols(); ++j) {
                const double y = (static_cast<std::size_t>(t) == j) ? 1.0 : 0.0;
                res.grad(r, j) = (probabilities(r, j) - y) * inv_batch;
            }
        }
    }
    res.loss *= inv_batch;
    return res;
}

}  // namespace biceph
