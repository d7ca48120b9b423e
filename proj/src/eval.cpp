#include "biceph/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "biceph/model.hpp"

namespace biceph {

int predicted_class_from_probs(const std::vector<double>& probs) {
    if (probs.empty()) throw ValidationError("prediction: empty probability row");
    if (probs.size() == 1) return probs[0] >= 0.5 ? 1 : 0;
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.size(); ++j)
        if (probs[j] > probs[best]) best = j;
    return static_cast<int>(best);
}

SubjectVerdict aggregate_subject(std::int64_t subject_id, int true_class,
                                 const std::vector<int>& votes, std::size_t num_classes) {
    if (votes.empty()) throw ValidationError("aggregate: empty vote list");
    if (num_classes < 2) throw ValidationError("aggregate: need at least two classes");

    SubjectVerdict v;
    v.subject_id = subject_id;
    v.true_class = true_class;
    v.vote_counts.assign(num_classes, 0);
    for (int vote : votes) {
        if (vote < 0 || static_cast<std::size_t>(vote) >= num_classes)
            throw ValidationError("aggregate: vote out of range");
        v.vote_counts[static_cast<std::size_t>(vote)]++;
    }

    if (num_classes == 2) {
        if (v.vote_counts[0] == v.vote_counts[1]) {
            v.tie = true;
            v.predicted_class = 1;  // positive class wins the "or more" tie
        } else {
            v.predicted_class = v.vote_counts[1] > v.vote_counts[0] ? 1 : 0;
        }
    } else {
        std::size_t best = 0;
        for (std::size_t c = 1; c < num_classes; ++c)
            if (v.vote_counts[c] > v.vote_counts[best]) best = c;
        std::size_t winners = 0;
        for (std::size_t c = 0; c < num_classes; ++c)
            if (v.vote_counts[c] == v.vote_counts[best]) ++winners;
        v.tie = winners > 1;
        v.predicted_class = static_cast<int>(best);  // lowest index among ties
    }
    return v;
}

std::vector<SubjectVerdict> aggregate_by_subject(const std::vector<SlicePrediction>& preds,
                                                 std::size_t num_classes) {
    std::map<std::int64_t, std::pair<int, std::vector<int>>> by_subject;
    for (const SlicePrediction& p : preds) {
        auto& entry = by_subject[p.subject_id];
        entry.first = p.true_class;
        entry.second.push_back(p.predicted_class);
    }
    std::vector<SubjectVerdict> verdicts;
    verdicts.reserve(by_subject.size());
    for (const auto& [id, entry] : by_subject)
        verdicts.push_back(aggregate_subject(id, entry.first, entry.second, num_classes));
    return verdicts;
}

double slice_accuracy(const std::vector<SlicePrediction>& preds) {
    if (preds.empty()) throw ValidationError("slice accuracy: empty predictions");
    std::size_t correct = 0;
    for (const SlicePrediction& p : preds)
        if (p.predicted_class == p.true_class) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double subject_accuracy(const std::vector<SubjectVerdict>& verdicts) {
    if (verdicts.empty()) throw ValidationError("subject accuracy: empty verdicts");
    std::size_t correct = 0;
    for (const SubjectVerdict& v : verdicts)
        if (v.predicted_class == v.true_class) ++correct;
    return static_cast<double>(correct) / static_cast<double>(verdicts.size());
}

namespace {

struct Neighbor {
    double dist;
    std::size_t index;
};

std::vector<Neighbor> nearest_k(const Matrix& ref, std::span<const double> query,
                                std::size_t k) {
    std::vector<Neighbor> all(ref.rows());
    for (std::size_t i = 0; i < ref.rows(); ++i) {
        const double* row = ref.row_ptr(i);
        double sq = 0.0;
        for (std::size_t j = 0; j < ref.cols(); ++j) {
            const double d = row[j] - query[j];
            sq += d * d;
        }
        all[i] = {std::sqrt(sq), i};
    }
    const auto cmp = [](const Neighbor& a, const Neighbor& b) {
        return a.dist != b.dist ? a.dist < b.dist : a.index < b.index;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                      cmp);
    all.resize(k);
    return all;
}

}  // namespace

int knn_predict(const Matrix& ref_embeddings, const std::vector<int>& ref_labels,
                std::span<const double> query, std::size_t k, std::size_t num_classes) {
    if (ref_embeddings.rows() == 0) throw ValidationError("knn: empty reference");
    if (ref_labels.size() != ref_embeddings.rows())
        throw ValidationError("knn: one label per reference row required");
    if (k == 0 || k > ref_embeddings.rows())
        throw ValidationError("knn: K must lie in [1, reference size]");
    if (query.size() != ref_embeddings.cols())
        throw ShapeError("knn: query width mismatch");

    std::vector<std::size_t> counts(num_classes, 0);
    for (const Neighbor& n : nearest_k(ref_embeddings, query, k)) {
        const int label = ref_labels[n.index];
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
            throw ValidationError("knn: reference label out of range");
        counts[static_cast<std::size_t>(label)]++;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < num_classes; ++c)
        if (counts[c] > counts[best]) best = c;  // lower class index wins ties
    return static_cast<int>(best);
}

NeighborhoodReport neighborhood_report(std::int64_t subject_id, int true_class,
                                       const Matrix& subject_embeddings,
                                       const Matrix& ref_embeddings,
                                       const std::vector<int>& ref_labels,
                                       const std::vector<std::size_t>& k_set,
                                       std::size_t num_classes) {
    if (ref_embeddings.rows() == 0) throw ValidationError("neighborhood: empty reference");
    for (std::size_t k : k_set)
        if (k == 0 || k > ref_embeddings.rows())
            throw ValidationError("neighborhood: K exceeds reference size");

    NeighborhoodReport report;
    report.subject_id = subject_id;
    report.true_class = true_class;
    report.k_values = k_set;
    report.counts.assign(k_set.size(), std::vector<std::size_t>(num_classes, 0));

    for (std::size_t s = 0; s < subject_embeddings.rows(); ++s) {
        const std::span<const double> query(subject_embeddings.row_ptr(s),
                                            subject_embeddings.cols());
        for (std::size_t ki = 0; ki < k_set.size(); ++ki) {
            const int majority =
                knn_predict(ref_embeddings, ref_labels, query, k_set[ki], num_classes);
            report.counts[ki][static_cast<std::size_t>(majority)]++;
        }
    }
    return report;
}

void jacobi_eigen_symmetric(Matrix a, std::vector<double>& eigenvalues, Matrix& eigenvectors) {
    if (a.rows() != a.cols()) throw ShapeError("jacobi: square matrix required");
    const std::size_t n = a.rows();
    eigenvectors = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) eigenvectors(i, i) = 1.0;

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off <= 1e-24) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i);
                    const double aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = eigenvectors(i, p);
                    const double viq = eigenvectors(i, q);
                    eigenvectors(i, p) = c * vip - s * viq;
                    eigenvectors(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) eigenvalues[i] = a(i, i);
}

PcaResult pca_project(const Matrix& embeddings, std::size_t out_dims) {
    const std::size_t n = embeddings.rows();
    const std::size_t f = embeddings.cols();
    if (n < 2) throw ValidationError("pca: need at least two rows");
    if (out_dims == 0 || out_dims > f)
        throw ValidationError("pca: out_dims must lie in [1, feature dim]");

    std::vector<double> mean(f, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = embeddings.row_ptr(i);
        for (std::size_t j = 0; j < f; ++j) mean[j] += row[j];
    }
    for (double& m : mean) m /= static_cast<double>(n);

    Matrix centered(n, f);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) centered(i, j) = embeddings(i, j) - mean[j];

    Matrix cov = matmul_at(centered, centered);
    cov *= 1.0 / static_cast<double>(n - 1);

    std::vector<double> eig;
    Matrix vecs;
    jacobi_eigen_symmetric(cov, eig, vecs);

    std::vector<std::size_t> order(f);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return eig[a] > eig[b]; });

    PcaResult res;
    res.components = Matrix(f, out_dims);
    res.explained_variance.resize(out_dims);
    double total_var = 0.0;
    for (double e : eig) total_var += std::fabs(e);
    res.degenerate = total_var <= 1e-18;

    for (std::size_t d = 0; d < out_dims; ++d) {
        const std::size_t src = order[d];
        res.explained_variance[d] = eig[src];
        // Sign convention: largest-magnitude entry positive.
        std::size_t arg = 0;
        for (std::size_t j = 1; j < f; ++j)
            if (std::fabs(vecs(j, src)) > std::fabs(vecs(arg, src))) arg = j;
        const double sign = vecs(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < f; ++j) res.components(j, d) = sign * vecs(j, src);
    }

    res.coords = matmul(centered, res.components);
    return res;
}

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double betacf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double eps = 1e-12;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("t-test: unequal sample lengths");
    if (a.size() < 2) throw ValidationError("t-test: need at least two pairs");
    const std::size_t n = a.size();

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);

    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (a[i] - b[i]) - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);
    if (var <= 0.0)
        throw DegenerateInputError("t-test: zero variance of paired differences");

    TTestResult res;
    res.df = n - 1;
    res.t = mean / std::sqrt(var / static_cast<double>(n));
    const double nu = static_cast<double>(res.df);
    res.p = regularized_incomplete_beta(nu / 2.0, 0.5, nu / (nu + res.t * res.t));
    return res;
}

}  // namespace biceph
