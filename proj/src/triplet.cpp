#include "biceph/triplet.hpp"

#include <algorithm>
#include <cmath>

namespace biceph {

void EmbeddingBatch::validate() const {
    if (subject_ids.size() != embeddings.rows() || class_labels.size() != embeddings.rows())
        throw ValidationError("embedding batch: ids/labels must match row count");
    require_finite(embeddings, "embedding batch");
}

Matrix pairwise_distances(const EmbeddingBatch& batch) {
    batch.validate();
    const std::size_t n = batch.size();
    const std::size_t f = batch.embeddings.cols();
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ri = batch.embeddings.row_ptr(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double* rj = batch.embeddings.row_ptr(j);
            double sq = 0.0;
            for (std::size_t k = 0; k < f; ++k) {
                const double diff = ri[k] - rj[k];
                sq += diff * diff;
            }
            const double dist = std::sqrt(std::max(0.0, sq));
            d(i, j) = dist;
            d(j, i) = dist;
        }
    }
    return d;
}

TripletSet mine_semihard(const EmbeddingBatch& batch, const MiningConfig& config) {
    batch.validate();
    if (!(config.margin > 0.0) || !std::isfinite(config.margin))
        throw ValidationError("mining: margin must be finite and positive");

    const Matrix d = pairwise_distances(batch);
    const std::size_t n = batch.size();

    TripletSet set;
    set.margin_used = config.margin;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t e = 0; e < n; ++e) {
            if (e == r || batch.subject_ids[e] != batch.subject_ids[r]) continue;
            const double dp = d(r, e);
            for (std::size_t i = 0; i < n; ++i) {
                if (batch.subject_ids[i] == batch.subject_ids[r]) continue;
                const double dn = d(r, i);
                if (dp < dn && dn < dp + config.margin) set.triples.push_back({r, e, i});
            }
        }
    }
    return set;
}

TripletLossResult triplet_loss(const EmbeddingBatch& batch, const TripletSet& triples,
                               double margin) {
    batch.validate();
    const std::size_t n = batch.size();
    const std::size_t f = batch.embeddings.cols();

    TripletLossResult res;
    res.loss = 0.0;
    res.grad = Matrix(n, f);
    if (triples.triples.empty()) return res;

    const double inv = 1.0 / static_cast<double>(triples.triples.size());
    for (const Triple& t : triples.triples) {
        if (t.anchor >= n || t.positive >= n || t.negative >= n)
            throw ValidationError("triplet loss: triple index out of range");
        const double* a = batch.embeddings.row_ptr(t.anchor);
        const double* p = batch.embeddings.row_ptr(t.positive);
        const double* q = batch.embeddings.row_ptr(t.negative);
        double dp_sq = 0.0, dn_sq = 0.0;
        for (std::size_t k = 0; k < f; ++k) {
            const double dpk = a[k] - p[k];
            const double dnk = a[k] - q[k];
            dp_sq += dpk * dpk;
            dn_sq += dnk * dnk;
        }
        const double dp = std::sqrt(std::max(0.0, dp_sq));
        const double dn = std::sqrt(std::max(0.0, dn_sq));
        const double hinge = dp - dn + margin;
        if (hinge <= 0.0) continue;
        res.loss += hinge * inv;

        double* ga = res.grad.row_ptr(t.anchor);
        double* gp = res.grad.row_ptr(t.positive);
        double* gq = res.grad.row_ptr(t.negative);
        if (dp > 0.0) {
            const double c = inv / dp;
            for (std::size_t k = 0; k < f; ++k) {
                const double dpk = (a[k] - p[k]) * c;
                ga[k] += dpk;
                gp[k] -= dpk;
            }
        }
        if (dn > 0.0) {
            const double c = inv / dn;
            for (std::size_t k = 0; k < f; ++k) {
                const double dnk = (a[k] - q[k]) * c;
                ga[k] -= dnk;
                gq[k] += dnk;
            }
        }
    }
    return res;
}

}  // namespace biceph
