#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "biceph/matrix.hpp"

namespace biceph {

struct SlicePrediction;  // defined in model.hpp

// Binary heads emit a single sigmoid column: class 1 iff p >= 0.5.
// Multiclass: argmax, lower index on exact ties.
int predicted_class_from_probs(const std::vector<double>& probs);

struct SubjectVerdict {
    std::int64_t subject_id = 0;
    int true_class = 0;
    int predicted_class = 0;
    std::vector<std::size_t> vote_counts;  // per class, sums to m
    bool tie = false;
};

// Majority voting over one subject's per-slice predicted classes. Binary: a
// class wins with more than half the votes; an exact even-m tie goes to the
// positive class (index 1) and is flagged. Multiclass: plurality, exact ties
// go to the lowest class index and are flagged.
SubjectVerdict aggregate_subject(std::int64_t subject_id, int true_class,
                                 const std::vector<int>& votes, std::size_t num_classes);

std::vector<SubjectVerdict> aggregate_by_subject(const std::vector<SlicePrediction>& preds,
                                                 std::size_t num_classes);

double slice_accuracy(const std::vector<SlicePrediction>& preds);
double subject_accuracy(const std::vector<SubjectVerdict>& verdicts);

// Majority label among the K nearest reference rows by Euclidean distance.
// Distance ties resolve to the lower reference index, label ties to the
// lower class index.
int knn_predict(const Matrix& ref_embeddings, const std::vector<int>& ref_labels,
                std::span<const double> query, std::size_t k, std::size_t num_classes);

struct NeighborhoodReport {
    std::int64_t subject_id = 0;
    int true_class = 0;
    std::vector<std::size_t> k_values;
    // counts[ki][c] = slices of the subject whose K-neighborhood majority is
    // class c; each row sums to the subject's slice count.
    std::vector<std::vector<std::size_t>> counts;
};

NeighborhoodReport neighborhood_report(std::int64_t subject_id, int true_class,
                                       const Matrix& subject_embeddings,
                                       const Matrix& ref_embeddings,
                                       const std::vector<int>& ref_labels,
                                       const std::vector<std::size_t>& k_set,
                                       std::size_t num_classes);

struct PcaResult {
    Matrix coords;                           // N x d
    std::vector<double> explained_variance;  // top-d covariance eigenvalues
    Matrix components;                       // F x d, orthonormal columns
    bool degenerate = false;                 // zero total variance
};

// Mean-centered projection onto the top covariance eigenvectors (cyclic
// Jacobi). Eigenvalues are non-increasing; each component's largest-
// magnitude entry is made positive.
PcaResult pca_project(const Matrix& embeddings, std::size_t out_dims);

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Eigenvalues unsorted; eigenvectors in columns.
void jacobi_eigen_symmetric(Matrix a, std::vector<double>& eigenvalues, Matrix& eigenvectors);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    std::size_t df = 0;
};

// Two-sided paired Student t-test on a - b with n-1 degrees of freedom; the
// p-value comes from the regularized incomplete beta function.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta I_x(a, b) by continued fraction, 1e-12
// convergence tolerance.
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace biceph
