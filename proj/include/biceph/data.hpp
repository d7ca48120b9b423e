#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "biceph/matrix.hpp"
#include "biceph/rng.hpp"

namespace biceph {

enum class ClassLabel : int { CN = 0, MCI = 1, AD = 2 };

const char* class_name(ClassLabel c);
ClassLabel class_from_name(const std::string& name);

enum class Plane { Axial, Coronal, Sagittal, Synthetic };

const char* plane_name(Plane p);
Plane plane_from_name(const std::string& name);

struct Subject {
    std::int64_t id = 0;
    ClassLabel class_label = ClassLabel::CN;
    std::vector<std::vector<double>> slices;  // m rows of input_dim
};

struct Cohort {
    Plane plane = Plane::Synthetic;
    std::size_t m = 0;          // slices per subject
    std::size_t input_dim = 0;  // slice feature length
    std::vector<Subject> subjects;

    std::size_t slice_count() const { return subjects.size() * m; }
    void validate() const;
    std::vector<ClassLabel> classes_present() const;
};

struct SyntheticSpec {
    std::size_t subjects_per_class = 30;
    std::size_t m = 16;
    std::size_t input_dim = 64;
    std::size_t num_classes = 2;     // 2 -> {CN, AD}, 3 -> {CN, MCI, AD}
    double class_separation = 12.0;  // exact distance between any two class means
    double subject_spread = 0.5;     // std of subject centers around the class mean
    double slice_noise = 1.25;       // std of slices around the subject center
    double entanglement = 0.0;       // fraction of slices displaced toward the rival class
    std::uint64_t seed = 1;

    void validate() const;
};

// Class means are an orthonormal frame drawn from the seeded generation
// stream, scaled so every pair of means is exactly class_separation apart.
// floor(entanglement * m) leading slices of each subject are rebased onto
// 0.2*center + 0.8*mu_rival (the nearest other-class mean) before noise.
Cohort generate_synthetic(const SyntheticSpec& spec);

struct SplitResult {
    Cohort train;
    Cohort val;
    Cohort test;
};

// Subject-granularity stratified split; a subject's slices never appear in
// more than one part. test_frac is taken from the whole cohort per class,
// val_frac_of_train from the remaining training pool per class.
SplitResult split_cohort(const Cohort& cohort, double train_frac, double test_frac,
                         double val_frac_of_train, std::uint64_t seed);

struct SamplerConfig {
    std::size_t subjects_per_batch = 10;  // W
    std::size_t slices_per_subject = 8;   // Z

    std::size_t batch_size() const { return subjects_per_batch * slices_per_subject; }
};

struct Batch {
    Matrix x;                               // B x input_dim
    std::vector<std::int64_t> subject_ids;  // per row
    std::vector<int> class_labels;          // task-local indices per row

    std::size_t size() const { return x.rows(); }
};

// Maps cohort class labels onto contiguous task-local indices.
struct LabelMap {
    std::vector<ClassLabel> classes;  // index -> label

    int index_of(ClassLabel c) const;
    std::size_t num_classes() const { return classes.size(); }
};

// Draws W distinct subjects with classes assigned round-robin, then Z
// distinct slices per subject (without replacement within the subject).
Batch sample_batch(const Cohort& cohort, const SamplerConfig& config, const LabelMap& labels,
                   Rng& rng);

void save_cohort(const Cohort& cohort, const std::string& path);
Cohort load_cohort(const std::string& path);

}  // namespace biceph
