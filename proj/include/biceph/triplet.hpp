#pragma once

#include <cstdint>
#include <vector>

#include "biceph/matrix.hpp"

namespace biceph {

struct EmbeddingBatch {
    Matrix embeddings;                      // B x F
    std::vector<std::int64_t> subject_ids;  // per row
    std::vector<int> class_labels;          // per row

    std::size_t size() const { return embeddings.rows(); }
    void validate() const;
};

struct Triple {
    std::size_t anchor;
    std::size_t positive;
    std::size_t negative;

    bool operator==(const Triple& o) const {
        return anchor == o.anchor && positive == o.positive && negative == o.negative;
    }
    bool operator<(const Triple& o) const {
        if (anchor != o.anchor) return anchor < o.anchor;
        if (positive != o.positive) return positive < o.positive;
        return negative < o.negative;
    }
};

struct TripletSet {
    std::vector<Triple> triples;
    double margin_used = 0.0;
};

struct MiningConfig {
    double margin = 0.2;
};

struct TripletLossResult {
    double loss;
    Matrix grad;  // B x F, mean over triples
};

// D[i][j] = Euclidean distance between rows i and j. Symmetric, zero
// diagonal; the squared sum is clamped at 0 before the square root.
Matrix pairwise_distances(const EmbeddingBatch& batch);

// Semi-hard mining: for every anchor r and positive e (same subject, e != r)
// emit (r, e, i) for every negative i (different subject) with
// d(r,e) < d(r,i) < d(r,e) + margin. A pair with no in-band negative
// contributes nothing; a single-subject batch yields an empty set.
TripletSet mine_semihard(const EmbeddingBatch& batch, const MiningConfig& config);

// Mean over triples of max(0, d(a,p) - d(a,n) + margin). The hinge
// subgradient at exactly 0 is 0; a zero positive or negative distance
// contributes a zero subgradient for that distance term.
TripletLossResult triplet_loss(const EmbeddingBatch& batch, const TripletSet& triples,
                               double margin);

}  // namespace biceph
