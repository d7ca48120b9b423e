#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "biceph/eval.hpp"
#include "biceph/model.hpp"
#include "support/oracles.hpp"

using namespace biceph;

TEST_CASE("majority vote: the paper thresholds for m=86 and m=112") {
    // 43 of 86 for the positive class already decides it ("43 or more").
    std::vector<int> votes(86, 0);
    std::fill_n(votes.begin(), 43, 1);
    const SubjectVerdict v43 = aggregate_subject(1, 1, votes, 2);
    CHECK(v43.predicted_class == 1);
    CHECK(v43.tie);

    std::fill(votes.begin(), votes.end(), 0);
    std::fill_n(votes.begin(), 42, 1);
    CHECK(aggregate_subject(1, 1, votes, 2).predicted_class == 0);

    std::fill(votes.begin(), votes.end(), 0);
    std::fill_n(votes.begin(), 44, 1);
    const SubjectVerdict v44 = aggregate_subject(1, 1, votes, 2);
    CHECK(v44.predicted_class == 1);
    CHECK(!v44.tie);

    // m=112: the 56/56 tie is flagged and goes to the positive class.
    std::vector<int> votes112(112, 0);
    std::fill_n(votes112.begin(), 56, 1);
    const SubjectVerdict v56 = aggregate_subject(2, 0, votes112, 2);
    CHECK(v56.tie);
    CHECK(v56.predicted_class == 1);
    CHECK(v56.vote_counts[0] + v56.vote_counts[1] == 112);

    std::fill(votes112.begin(), votes112.end(), 0);
    std::fill_n(votes112.begin(), 55, 1);
    CHECK(aggregate_subject(2, 0, votes112, 2).predicted_class == 0);
}

TEST_CASE("majority vote: unanimous, multiclass plurality, and validation") {
    CHECK(aggregate_subject(0, 1, std::vector<int>(7, 1), 2).predicted_class == 1);

    const SubjectVerdict plur = aggregate_subject(0, 2, {0, 2, 2, 1, 2}, 3);
    CHECK(plur.predicted_class == 2);
    CHECK(!plur.tie);
    CHECK(plur.vote_counts == std::vector<std::size_t>{1, 1, 3});

    // Exact multiclass tie resolves to the lowest class index, flagged.
    const SubjectVerdict tie = aggregate_subject(0, 1, {0, 1, 1, 0, 2, 2}, 3);
    CHECK(tie.predicted_class == 0);
    CHECK(tie.tie);

    CHECK_THROWS_AS(aggregate_subject(0, 0, {}, 2), ValidationError);
    CHECK_THROWS_AS(aggregate_subject(0, 0, {0, 3}, 2), ValidationError);
}

namespace {

std::vector<SlicePrediction> make_preds(
    const std::vector<std::tuple<std::int64_t, int, int>>& rows) {
    std::vector<SlicePrediction> preds;
    for (const auto& [id, truth, predicted] : rows) {
        SlicePrediction p;
        p.subject_id = id;
        p.true_class = truth;
        p.predicted_class = predicted;
        preds.push_back(p);
    }
    return preds;
}

}  // namespace

TEST_CASE("accuracies: trivial fractions and the under-threshold regime") {
    auto all = make_preds({{0, 0, 0}, {0, 0, 0}, {1, 1, 1}, {1, 1, 1}});
    CHECK(slice_accuracy(all) == doctest::Approx(1.0));
    CHECK(subject_accuracy(aggregate_by_subject(all, 2)) == doctest::Approx(1.0));

    auto half = make_preds({{0, 0, 0}, {0, 0, 1}, {1, 1, 1}, {1, 1, 0}});
    CHECK(slice_accuracy(half) == doctest::Approx(0.5));

    // Slice errors stay under the voting threshold: subject accuracy 1.0
    // while slice accuracy < 1.0.
    auto fig1b = make_preds({{0, 0, 0}, {0, 0, 0}, {0, 0, 1},
                             {1, 1, 1}, {1, 1, 1}, {1, 1, 0}});
    CHECK(slice_accuracy(fig1b) < 1.0);
    CHECK(subject_accuracy(aggregate_by_subject(fig1b, 2)) == doctest::Approx(1.0));

    CHECK_THROWS_AS(slice_accuracy({}), ValidationError);
    CHECK_THROWS_AS(subject_accuracy({}), ValidationError);
}

TEST_CASE("subject accuracy is invariant to slice order within subjects") {
    auto preds = make_preds({{0, 0, 1}, {0, 0, 0}, {0, 0, 0},
                             {1, 1, 1}, {1, 1, 0}, {1, 1, 1}});
    const double base = subject_accuracy(aggregate_by_subject(preds, 2));
    std::reverse(preds.begin(), preds.end());
    CHECK(subject_accuracy(aggregate_by_subject(preds, 2)) == doctest::Approx(base));
}

TEST_CASE("knn: single nearest neighbor and the index tie rule") {
    const Matrix ref = Matrix::from_rows({{0.0, 0.0}, {2.0, 0.0}});
    const std::vector<int> labels = {0, 1};
    const std::vector<double> q_near{0.4, 0.0};
    CHECK(knn_predict(ref, labels, q_near, 1, 2) == 0);

    // Equidistant query at K=1: lower reference index wins.
    const std::vector<double> q_mid{1.0, 0.0};
    CHECK(knn_predict(ref, labels, q_mid, 1, 2) == 0);

    CHECK_THROWS_AS(knn_predict(Matrix(), {}, q_mid, 1, 2), ValidationError);
    CHECK_THROWS_AS(knn_predict(ref, labels, q_mid, 3, 2), ValidationError);
}

TEST_CASE("knn matches an exhaustive-sort oracle on random data") {
    Rng rng(314);
    const std::size_t n = 200, dim = 6;
    const Matrix ref = oracles::random_matrix(rng, n, dim);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.below(3));

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> q(dim);
        for (double& x : q) x = 2.0 * rng.next_unit() - 1.0;
        for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{11}}) {
            // Oracle: full sort of (distance, index), majority with the same
            // tie rules.
            std::vector<std::pair<double, std::size_t>> order(n);
            for (std::size_t i = 0; i < n; ++i) {
                double sq = 0.0;
                for (std::size_t j = 0; j < dim; ++j) {
                    const double d = ref(i, j) - q[j];
                    sq += d * d;
                }
                order[i] = {std::sqrt(sq), i};
            }
            std::sort(order.begin(), order.end());
            std::vector<std::size_t> counts(3, 0);
            for (std::size_t i = 0; i < k; ++i) counts[labels[order[i].second]]++;
            std::size_t expect = 0;
            for (std::size_t c = 1; c < 3; ++c)
                if (counts[c] > counts[expect]) expect = c;

            CHECK(knn_predict(ref, labels, q, k, 3) == static_cast<int>(expect));
        }
    }
}

TEST_CASE("knn is invariant to reference permutation on tie-free fixtures") {
    Rng rng(2718);
    const std::size_t n = 40, dim = 4;
    const Matrix ref = oracles::random_matrix(rng, n, dim);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.below(2));

    Matrix shuffled(n, dim);
    std::vector<int> shuffled_labels(n);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = n - 1 - i;
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(ref.row_ptr(perm[i]), ref.row_ptr(perm[i]) + dim, shuffled.row_ptr(i));
        shuffled_labels[i] = labels[perm[i]];
    }
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> q(dim);
        for (double& x : q) x = 2.0 * rng.next_unit() - 1.0;
        CHECK(knn_predict(ref, labels, q, 5, 2) ==
              knn_predict(shuffled, shuffled_labels, q, 5, 2));
    }
}

TEST_CASE("neighborhood report: single-class reference and count sums") {
    Rng rng(11);
    const Matrix ref = oracles::random_matrix(rng, 30, 4);
    const std::vector<int> labels(30, 1);  // every reference point is class 1
    const Matrix subject = oracles::random_matrix(rng, 12, 4);

    const NeighborhoodReport rep =
        neighborhood_report(5, 1, subject, ref, labels, {3, 7, 15}, 2);
    REQUIRE(rep.counts.size() == 3);
    for (const auto& row : rep.counts) {
        CHECK(row[0] == 0);
        CHECK(row[1] == 12);  // all slices land in class 1, sums equal m
    }
    CHECK_THROWS_AS(neighborhood_report(5, 1, subject, ref, labels, {40}, 2),
                    ValidationError);
}

TEST_CASE("pca: collinear data concentrates variance on one component") {
    Matrix data(20, 3);
    for (std::size_t i = 0; i < 20; ++i) {
        const double t = static_cast<double>(i) - 9.5;
        data(i, 0) = 2.0 * t;
        data(i, 1) = -1.0 * t;
        data(i, 2) = 0.5 * t;
    }
    const PcaResult res = pca_project(data, 2);
    CHECK(res.explained_variance[0] > 0.0);
    CHECK(std::fabs(res.explained_variance[1]) < 1e-10);
    CHECK(!res.degenerate);
}

TEST_CASE("pca matches the pivot-Jacobi oracle on a 5x5 covariance case") {
    Rng rng(5050);
    const Matrix data = oracles::random_matrix(rng, 40, 5, 2.0);
    const PcaResult res = pca_project(data, 5);

    // Oracle route: covariance + classical pivoting Jacobi.
    std::vector<double> mean(5, 0.0);
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t j = 0; j < 5; ++j) mean[j] += data(i, j) / 40.0;
    Matrix centered(40, 5);
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t j = 0; j < 5; ++j) centered(i, j) = data(i, j) - mean[j];
    Matrix cov = oracles::matmul_naive(transpose(centered), centered);
    cov *= 1.0 / 39.0;

    std::vector<double> values;
    Matrix vectors;
    oracles::jacobi_pivot_eigen(cov, values, vectors);
    std::vector<std::size_t> order = {0, 1, 2, 3, 4};
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

    for (std::size_t d = 0; d < 5; ++d) {
        CHECK(res.explained_variance[d] == doctest::Approx(values[order[d]]).epsilon(1e-6));
        // Compare eigenvectors up to sign.
        double dot = 0.0;
        for (std::size_t j = 0; j < 5; ++j) dot += res.components(j, d) * vectors(j, order[d]);
        CHECK(std::fabs(std::fabs(dot) - 1.0) < 1e-6);
    }
}

TEST_CASE("pca components are orthonormal with non-increasing eigenvalues") {
    Rng rng(606);
    const Matrix data = oracles::random_matrix(rng, 60, 8, 3.0);
    const PcaResult res = pca_project(data, 6);
    const Matrix gram = matmul_at(res.components, res.components);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            CHECK(std::fabs(gram(i, j) - (i == j ? 1.0 : 0.0)) < 1e-8);
    for (std::size_t d = 1; d < 6; ++d)
        CHECK(res.explained_variance[d] <= res.explained_variance[d - 1] + 1e-12);
}

TEST_CASE("pca is invariant to adding a constant row offset") {
    Rng rng(808);
    const Matrix data = oracles::random_matrix(rng, 25, 4);
    Matrix shifted = data;
    for (std::size_t i = 0; i < 25; ++i)
        for (std::size_t j = 0; j < 4; ++j) shifted(i, j) += 13.75;
    const PcaResult a = pca_project(data, 3);
    const PcaResult b = pca_project(shifted, 3);
    CHECK(max_abs_diff(a.coords, b.coords) < 1e-10);
}

TEST_CASE("pca flags all-identical rows as degenerate") {
    Matrix flat(5, 3);
    for (std::size_t i = 0; i < flat.size(); ++i) flat.data()[i] = 2.5;
    const PcaResult res = pca_project(flat, 2);
    CHECK(res.degenerate);
    CHECK(std::fabs(res.explained_variance[0]) < 1e-18);
    CHECK(max_abs_diff(res.coords, Matrix(5, 2)) < 1e-15);

    CHECK_THROWS_AS(pca_project(Matrix(1, 4), 2), ValidationError);
    CHECK_THROWS_AS(pca_project(Matrix(5, 4), 5), ValidationError);
}

TEST_CASE("paired t-test: degenerate variance and zero-mean cases") {
    CHECK_THROWS_AS(paired_t_test({1, 2, 3, 4}, {0, 1, 2, 3}), DegenerateInputError);
    CHECK_THROWS_AS(paired_t_test({1, 1}, {1, 1}), DegenerateInputError);
    CHECK_THROWS_AS(paired_t_test({1, 2}, {1}), ValidationError);
    CHECK_THROWS_AS(paired_t_test({1}, {1}), ValidationError);

    const TTestResult res = paired_t_test({1, -1, 2, -2, 0}, {0, 0, 0, 0, 0});
    CHECK(res.t == doctest::Approx(0.0));
    CHECK(res.p == doctest::Approx(1.0));
}

TEST_CASE("paired t-test matches the quadrature oracle on a textbook sample") {
    // Paired observations, n = 10.
    const std::vector<double> before = {125, 132, 138, 120, 125, 127, 136, 139, 131, 132};
    const std::vector<double> after = {118, 134, 130, 124, 105, 130, 130, 132, 123, 128};
    const TTestResult res = paired_t_test(before, after);

    // Independent t recomputation.
    double mean = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) mean += before[i] - after[i];
    mean /= 10.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        const double d = before[i] - after[i] - mean;
        ss += d * d;
    }
    const double t_expect = mean / std::sqrt(ss / 9.0 / 10.0);
    CHECK(res.t == doctest::Approx(t_expect).epsilon(1e-12));
    CHECK(res.df == 9);
    CHECK(std::fabs(res.p - oracles::t_pvalue_quadrature(res.t, 9)) < 1e-6);
}

TEST_CASE("t-test p-values match quadrature across a range of t and df") {
    for (const double t : {0.3, 1.0, 2.2, 4.5}) {
        for (const std::size_t df : {std::size_t{2}, std::size_t{5}, std::size_t{17}}) {
            const double nu = static_cast<double>(df);
            const double p = regularized_incomplete_beta(nu / 2.0, 0.5, nu / (nu + t * t));
            CHECK(std::fabs(p - oracles::t_pvalue_quadrature(t, df)) < 1e-6);
        }
    }
}

TEST_CASE("predicted class from probabilities") {
    CHECK(predicted_class_from_probs({0.7}) == 1);
    CHECK(predicted_class_from_probs({0.3}) == 0);
    CHECK(predicted_class_from_probs({0.2, 0.5, 0.3}) == 1);
    CHECK(predicted_class_from_probs({0.4, 0.2, 0.4}) == 0);  // tie -> lower index
}
