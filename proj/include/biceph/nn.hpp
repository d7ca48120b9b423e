#pragma once

#include <cstdint>
#include <vector>

#include "biceph/matrix.hpp"
#include "biceph/rng.hpp"

namespace biceph {

enum class Activation { Identity, ReLU, Sigmoid, Softmax };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// f(A) applied row-wise. Softmax subtracts the per-row max before
// exponentiating.
Matrix apply_activation(Activation act, const Matrix& pre);

// Given dL/d(output), returns dL/d(pre-activation). `pre` and `out` are the
// cached forward values. Softmax uses the full Jacobian-vector product
// dL/da_j = o_j * (u_j - sum_k u_k o_k); ReLU uses subgradient 0 at 0.
Matrix activation_backward(Activation act, const Matrix& upstream, const Matrix& pre,
                           const Matrix& out);

struct DenseGrad {
    Matrix weight_grad;  // out_dim x (in_dim + 1)
    Matrix input_grad;   // batch x in_dim
};

// Fully connected layer with the bias folded into the weight matrix: the
// input is extended with a constant-1 column, so weights are
// out_dim x (in_dim + 1) and forward computes f(W * [x; 1]) per row.
class DenseLayer {
public:
    DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation act);

    std::size_t in_dim() const { return in_dim_; }
    std::size_t out_dim() const { return out_dim_; }
    Activation activation() const { return act_; }

    Matrix& weights() { return weights_; }
    const Matrix& weights() const { return weights_; }

    // Glorot-uniform in [-sqrt(6/(in+out)), +sqrt(6/(in+out))], bias column
    // included; entries drawn row-major.
    void init_weights(Rng& rng);

    Matrix forward(const Matrix& x);

    // upstream is dL/d(output).
    DenseGrad backward(const Matrix& upstream) const;

    // upstream is dL/d(pre-activation); used when the loss is fused with the
    // output activation (softmax/sigmoid cross-entropy).
    DenseGrad backward_preactivation(const Matrix& delta) const;

    bool has_cache() const { return has_cache_; }
    void clear_cache();

private:
    DenseGrad backward_from_delta(const Matrix& delta) const;

    std::size_t in_dim_;
    std::size_t out_dim_;
    Activation act_;
    Matrix weights_;

    Matrix cached_xb_;   // batch x (in_dim + 1)
    Matrix cached_pre_;  // batch x out_dim
    Matrix cached_out_;  // batch x out_dim
    bool has_cache_ = false;
};

// Row-wise Euclidean normalization, y = x / ||x||.
class L2NormLayer {
public:
    static constexpr double kEpsilonNorm = 1e-12;

    Matrix forward(const Matrix& x);

    // Per row: g = (u - (u . y) y) / ||x||.
    Matrix backward(const Matrix& upstream) const;

    bool has_cache() const { return has_cache_; }
    void clear_cache();

private:
    Matrix cached_out_;
    std::vector<double> cached_norms_;
    bool has_cache_ = false;
};

struct CrossEntropyResult {
    double loss;      // mean negative log-likelihood over the batch
    Matrix grad;      // dL/d(logits), already divided by the batch size
};

// Binary head (single sigmoid column): loss_i = -[t ln p + (1-t) ln(1-p)],
// logit gradient (p - t)/B. Multiclass (softmax row): loss_i = -ln p_y,
// logit gradient (p - onehot)/B. Labels are class indices.
CrossEntropyResult cross_entropy(const Matrix& probabilities, const std::vector<int>& labels);

}  // namespace biceph
