#include "biceph/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "biceph/jsonio.hpp"
#include "json.hpp"

namespace biceph {

const char* class_name(ClassLabel c) {
    switch (c) {
        case ClassLabel::CN: return "CN";
        case ClassLabel::MCI: return "MCI";
        case ClassLabel::AD: return "AD";
    }
    return "?";
}

ClassLabel class_from_name(const std::string& name) {
    if (name == "CN") return ClassLabel::CN;
    if (name == "MCI") return ClassLabel::MCI;
    if (name == "AD") return ClassLabel::AD;
    throw ValidationError("unknown class label: " + name);
}

const char* plane_name(Plane p) {
    switch (p) {
        case Plane::Axial: return "axial";
        case Plane::Coronal: return "coronal";
        case Plane::Sagittal: return "sagittal";
        case Plane::Synthetic: return "synthetic";
    }
    return "?";
}

Plane plane_from_name(const std::string& name) {
    if (name == "axial") return Plane::Axial;
    if (name == "coronal") return Plane::Coronal;
    if (name == "sagittal") return Plane::Sagittal;
    if (name == "synthetic") return Plane::Synthetic;
    throw ValidationError("unknown plane: " + name);
}

void Cohort::validate() const {
    if (m == 0) throw ValidationError("cohort: m must be >= 1");
    std::set<std::int64_t> ids;
    for (const Subject& s : subjects) {
        if (!ids.insert(s.id).second)
            throw ValidationError("cohort: duplicate subject id " + std::to_string(s.id));
        if (s.slices.size() != m)
            throw ValidationError("cohort: subject " + std::to_string(s.id) +
                                  " has wrong slice count");
        for (const auto& slice : s.slices) {
            if (slice.size() != input_dim)
                throw ValidationError("cohort: slice length mismatch for subject " +
                                      std::to_string(s.id));
            for (double v : slice)
                if (!std::isfinite(v))
                    throw ValidationError("cohort: non-finite slice value");
        }
    }
}

std::vector<ClassLabel> Cohort::classes_present() const {
    std::set<int> seen;
    for (const Subject& s : subjects) seen.insert(static_cast<int>(s.class_label));
    std::vector<ClassLabel> out;
    for (int c : seen) out.push_back(static_cast<ClassLabel>(c));
    return out;
}

void SyntheticSpec::validate() const {
    if (subjects_per_class == 0) throw ValidationError("synthetic spec: subjects_per_class >= 1");
    if (m == 0) throw ValidationError("synthetic spec: m >= 1");
    if (num_classes != 2 && num_classes != 3)
        throw ValidationError("synthetic spec: num_classes must be 2 or 3");
    if (input_dim < num_classes)
        throw ValidationError("synthetic spec: input_dim must be >= num_classes");
    if (!(class_separation >= 0.0) || !std::isfinite(class_separation))
        throw ValidationError("synthetic spec: class_separation must be >= 0");
    if (!(subject_spread >= 0.0) || !std::isfinite(subject_spread))
        throw ValidationError("synthetic spec: subject_spread must be >= 0");
    if (!(slice_noise >= 0.0) || !std::isfinite(slice_noise))
        throw ValidationError("synthetic spec: slice_noise must be >= 0");
    if (!(entanglement >= 0.0 && entanglement <= 1.0))
        throw ValidationError("synthetic spec: entanglement must lie in [0, 1]");
}

namespace {

std::vector<double> draw_vector(NormalSampler& gauss, std::size_t dim, double scale) {
    std::vector<double> v(dim);
    for (double& x : v) x = scale * gauss.next();
    return v;
}

// Orthonormal frame via Gram-Schmidt on seeded Gaussian draws.
std::vector<std::vector<double>> class_means(NormalSampler& gauss, std::size_t dim,
                                             std::size_t num_classes, double separation) {
    std::vector<std::vector<double>> basis;
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::vector<double> v = draw_vector(gauss, dim, 1.0);
        for (const auto& b : basis) {
            double dot = 0.0;
            for (std::size_t j = 0; j < dim; ++j) dot += v[j] * b[j];
            for (std::size_t j = 0; j < dim; ++j) v[j] -= dot * b[j];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-9) throw ValidationError("class mean construction degenerate");
        for (double& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    // ||q_i - q_j|| = sqrt(2) for an orthonormal pair, so this scale makes
    // every pair of means exactly `separation` apart.
    const double scale = separation / std::sqrt(2.0);
    for (auto& b : basis)
        for (double& x : b) x *= scale;
    return basis;
}

ClassLabel class_for_index(std::size_t num_classes, std::size_t c) {
    if (num_classes == 2) return c == 0 ? ClassLabel::CN : ClassLabel::AD;
    return static_cast<ClassLabel>(static_cast<int>(c));
}

}  // namespace

Cohort generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng = Rng::stream(spec.seed, "generation");
    NormalSampler gauss(rng);

    const auto means = class_means(gauss, spec.input_dim, spec.num_classes,
                                   spec.class_separation);

    Cohort cohort;
    cohort.plane = Plane::Synthetic;
    cohort.m = spec.m;
    cohort.input_dim = spec.input_dim;

    const std::size_t n_displaced =
        static_cast<std::size_t>(std::floor(spec.entanglement * static_cast<double>(spec.m)));
    std::int64_t next_id = 0;

    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t k = 0; k < spec.subjects_per_class; ++k) {
            Subject subj;
            subj.id = next_id++;
            subj.class_label = class_for_index(spec.num_classes, c);

            std::vector<double> center = means[c];
            {
                const std::vector<double> noise =
                    draw_vector(gauss, spec.input_dim, spec.subject_spread);
                for (std::size_t j = 0; j < spec.input_dim; ++j) center[j] += noise[j];
            }

            // Nearest other-class mean to this subject's center; lower class
            // index wins exact ties.
            std::size_t rival = (c == 0) ? 1 : 0;
            double best = -1.0;
            for (std::size_t c2 = 0; c2 < spec.num_classes; ++c2) {
                if (c2 == c) continue;
                double sq = 0.0;
                for (std::size_t j = 0; j < spec.input_dim; ++j) {
                    const double diff = center[j] - means[c2][j];
                    sq += diff * diff;
                }
                if (best < 0.0 || sq < best) {
                    best = sq;
                    rival = c2;
                }
            }

            subj.slices.reserve(spec.m);
            for (std::size_t s = 0; s < spec.m; ++s) {
                std::vector<double> slice = draw_vector(gauss, spec.input_dim, spec.slice_noise);
                const bool displaced = s < n_displaced;
                for (std::size_t j = 0; j < spec.input_dim; ++j) {
                    const double base =
                        displaced ? 0.2 * center[j] + 0.8 * means[rival][j] : center[j];
                    slice[j] += base;
                }
                subj.slices.push_back(std::move(slice));
            }
            cohort.subjects.push_back(std::move(subj));
        }
    }
    return cohort;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::vector<std::size_t> indices, Rng& rng) {
    for (std::size_t i = 0; i + 1 < indices.size(); ++i) {
        const std::size_t j = i + rng.below(indices.size() - i);
        std::swap(indices[i], indices[j]);
    }
    return indices;
}

}  // namespace

SplitResult split_cohort(const Cohort& cohort, double train_frac, double test_frac,
                         double val_frac_of_train, std::uint64_t seed) {
    cohort.validate();
    if (!(train_frac > 0.0 && test_frac > 0.0 && train_frac < 1.0 && test_frac < 1.0))
        throw ValidationError("split: train/test fractions must lie in (0, 1)");
    if (std::fabs(train_frac + test_frac - 1.0) > 1e-9)
        throw ValidationError("split: train_frac + test_frac must equal 1");
    if (!(val_frac_of_train > 0.0 && val_frac_of_train < 1.0))
        throw ValidationError("split: val_frac_of_train must lie in (0, 1)");

    Rng rng = Rng::stream(seed, "split");

    // Class groups processed in ascending class-label order; within each
    // class the shuffled order is consumed test first, then val, then train.
    std::vector<std::vector<std::size_t>> by_class(3);
    for (std::size_t i = 0; i < cohort.subjects.size(); ++i)
        by_class[static_cast<std::size_t>(cohort.subjects[i].class_label)].push_back(i);

    SplitResult out;
    for (Cohort* part : {&out.train, &out.val, &out.test}) {
        part->plane = cohort.plane;
        part->m = cohort.m;
        part->input_dim = cohort.input_dim;
    }

    for (const auto& group : by_class) {
        if (group.empty()) continue;
        const std::size_t n = group.size();
        const auto n_test = static_cast<std::size_t>(
            std::lround(static_cast<double>(n) * test_frac));
        const auto n_val = static_cast<std::size_t>(
            std::lround(static_cast<double>(n - n_test) * val_frac_of_train));
        const std::size_t n_train = n - n_test - n_val;
        if (n_test == 0 || n_val == 0 || n_train == 0)
            throw ValidationError("split: too few subjects in a class to stratify");

        const std::vector<std::size_t> order = shuffled_indices(group, rng);
        for (std::size_t i = 0; i < n; ++i) {
            const Subject& s = cohort.subjects[order[i]];
            if (i < n_test)
                out.test.subjects.push_back(s);
            else if (i < n_test + n_val)
                out.val.subjects.push_back(s);
            else
                out.train.subjects.push_back(s);
        }
    }

    // Leakage guard, exhaustively checked on every split.
    std::set<std::int64_t> seen;
    for (const Cohort* part : {&out.train, &out.val, &out.test})
        for (const Subject& s : part->subjects)
            if (!seen.insert(s.id).second)
                throw ValidationError("split: subject " + std::to_string(s.id) +
                                      " assigned to two splits");
    return out;
}

int LabelMap::index_of(ClassLabel c) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
        if (classes[i] == c) return static_cast<int>(i);
    return -1;
}

Batch sample_batch(const Cohort& cohort, const SamplerConfig& config, const LabelMap& labels,
                   Rng& rng) {
    if (config.slices_per_subject == 0 || config.subjects_per_batch == 0)
        throw ValidationError("sampler: batch dimensions must be positive");
    if (config.slices_per_subject > cohort.m)
        throw ValidationError("sampler: Z exceeds slices per subject");
    if (config.subjects_per_batch > cohort.subjects.size())
        throw ValidationError("sampler: W exceeds available subjects");

    const std::size_t n_classes = labels.num_classes();
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
        const int idx = labels.index_of(cohort.subjects[i].class_label);
        if (idx < 0)
            throw ValidationError("sampler: cohort contains a class outside the task");
        by_class[static_cast<std::size_t>(idx)].push_back(i);
    }

    // Round-robin class assignment over the W subject slots.
    std::vector<std::size_t> per_class(n_classes, 0);
    for (std::size_t s = 0; s < config.subjects_per_batch; ++s) per_class[s % n_classes]++;
    for (std::size_t c = 0; c < n_classes; ++c)
        if (per_class[c] > by_class[c].size())
            throw ValidationError("sampler: not enough subjects of class " +
                                  std::string(class_name(labels.classes[c])));

    // Distinct subjects per class, chosen by partial Fisher-Yates in class
    // order; slots then consume each class's picks in sequence.
    std::vector<std::vector<std::size_t>> picks(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::vector<std::size_t> pool = by_class[c];
        for (std::size_t i = 0; i < per_class[c]; ++i) {
            const std::size_t j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
            picks[c].push_back(pool[i]);
        }
    }

    Batch batch;
    batch.x = Matrix(config.batch_size(), cohort.input_dim);
    batch.subject_ids.reserve(config.batch_size());
    batch.class_labels.reserve(config.batch_size());

    std::vector<std::size_t> cursor(n_classes, 0);
    std::size_t row = 0;
    for (std::size_t s = 0; s < config.subjects_per_batch; ++s) {
        const std::size_t c = s % n_classes;
        const Subject& subj = cohort.subjects[picks[c][cursor[c]++]];

        std::vector<std::size_t> slice_idx(cohort.m);
        for (std::size_t i = 0; i < cohort.m; ++i) slice_idx[i] = i;
        for (std::size_t i = 0; i < config.slices_per_subject; ++i) {
            const std::size_t j = i + rng.below(slice_idx.size() - i);
            std::swap(slice_idx[i], slice_idx[j]);
            const std::vector<double>& slice = subj.slices[slice_idx[i]];
            std::copy(slice.begin(), slice.end(), batch.x.row_ptr(row));
            batch.subject_ids.push_back(subj.id);
            batch.class_labels.push_back(static_cast<int>(c));
            ++row;
        }
    }
    return batch;
}

void save_cohort(const Cohort& cohort, const std::string& path) {
    cohort.validate();
    std::string out;
    out.reserve(cohort.slice_count() * cohort.input_dim * 24 + 4096);
    out += "{\"version\":1,\"plane\":\"";
    out += plane_name(cohort.plane);
    out += "\",\"m\":" + std::to_string(cohort.m);
    out += ",\"input_dim\":" + std::to_string(cohort.input_dim);
    out += ",\"subjects\":[";
    for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
        const Subject& s = cohort.subjects[i];
        if (i) out += ',';
        out += "{\"id\":" + std::to_string(s.id);
        out += ",\"class\":\"";
        out += class_name(s.class_label);
        out += "\",\"slices\":[";
        for (std::size_t j = 0; j < s.slices.size(); ++j) {
            if (j) out += ',';
            append_double_array(out, s.slices[j]);
        }
        out += "]}";
    }
    out += "]}\n";
    write_text_file(path, out);
}

Cohort load_cohort(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("cohort parse error: " + std::string(e.what()));
    }
    Cohort cohort;
    try {
        if (j.at("version").get<int>() != 1)
            throw ValidationError("cohort: unsupported format version");
        cohort.plane = plane_from_name(j.at("plane").get<std::string>());
        cohort.m = j.at("m").get<std::size_t>();
        cohort.input_dim = j.at("input_dim").get<std::size_t>();
        for (const auto& js : j.at("subjects")) {
            Subject s;
            s.id = js.at("id").get<std::int64_t>();
            s.class_label = class_from_name(js.at("class").get<std::string>());
            for (const auto& slice : js.at("slices"))
                s.slices.push_back(slice.get<std::vector<double>>());
            cohort.subjects.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("cohort schema error: " + std::string(e.what()));
    }
    cohort.validate();
    return cohort;
}

}  // namespace biceph
