#include "biceph/exports.hpp"

#include <cstdio>

#include "biceph/jsonio.hpp"
#include "json.hpp"

namespace biceph {

std::string metrics_csv_header() {
    return "epoch,learning_rate,train_ce,train_triplet,n_triplets,train_slice_acc,"
           "train_subject_acc,val_ce,val_slice_acc,val_subject_acc\n";
}

std::string metrics_csv_row(const EpochStats& r) {
    std::string out = std::to_string(r.epoch);
    out += ',' + format_double_17(r.learning_rate);
    out += ',' + format_double_17(r.train_ce);
    out += ',' + format_double_17(r.train_triplet);
    out += ',' + std::to_string(r.n_triplets);
    out += ',' + format_double_17(r.train_slice_acc);
    out += ',' + format_double_17(r.train_subject_acc);
    out += ',' + format_double_17(r.val_ce);
    out += ',' + format_double_17(r.val_slice_acc);
    out += ',' + format_double_17(r.val_subject_acc);
    out += '\n';
    return out;
}

std::string metrics_csv(const std::vector<EpochStats>& rows) {
    std::string out = metrics_csv_header();
    for (const EpochStats& r : rows) out += metrics_csv_row(r);
    return out;
}

std::string embeddings_csv(const std::vector<SlicePrediction>& preds, const LabelMap& labels) {
    std::string out = "subject_id,slice_index,class";
    const std::size_t f = preds.empty() ? 0 : preds[0].embedding.size();
    for (std::size_t j = 0; j < f; ++j) out += ",e_" + std::to_string(j);
    out += '\n';
    for (const SlicePrediction& p : preds) {
        out += std::to_string(p.subject_id);
        out += ',' + std::to_string(p.slice_index);
        out += ',';
        out += class_name(labels.classes[static_cast<std::size_t>(p.true_class)]);
        for (double v : p.embedding) out += ',' + format_double_17(v);
        out += '\n';
    }
    return out;
}

std::string pca_csv(const std::vector<SlicePrediction>& preds, const Matrix& coords,
                    const LabelMap& labels) {
    if (coords.rows() != preds.size()) throw ShapeError("pca csv: row count mismatch");
    std::string out = "subject_id,slice_index,class";
    for (std::size_t j = 0; j < coords.cols(); ++j) out += ",pc_" + std::to_string(j);
    out += '\n';
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const SlicePrediction& p = preds[i];
        out += std::to_string(p.subject_id);
        out += ',' + std::to_string(p.slice_index);
        out += ',';
        out += class_name(labels.classes[static_cast<std::size_t>(p.true_class)]);
        for (std::size_t j = 0; j < coords.cols(); ++j)
            out += ',' + format_double_17(coords(i, j));
        out += '\n';
    }
    return out;
}

EvaluationReport build_evaluation_report(const std::string& split,
                                         const std::vector<SlicePrediction>& preds,
                                         const LabelMap& labels) {
    EvaluationReport rep;
    rep.split = split;
    rep.slices = preds.size();
    rep.slice_acc = slice_accuracy(preds);
    const auto verdicts = aggregate_by_subject(preds, labels.num_classes());
    rep.subjects = verdicts.size();
    rep.subject_acc = subject_accuracy(verdicts);
    rep.confusion.assign(labels.num_classes(),
                         std::vector<std::size_t>(labels.num_classes(), 0));
    for (const SubjectVerdict& v : verdicts) {
        rep.confusion[static_cast<std::size_t>(v.true_class)]
                     [static_cast<std::size_t>(v.predicted_class)]++;
        if (v.tie) rep.ties++;
    }
    return rep;
}

std::string evaluation_report_json(const EvaluationReport& report, const LabelMap& labels) {
    nlohmann::json j;
    j["split"] = report.split;
    j["subjects"] = report.subjects;
    j["slices"] = report.slices;
    j["slice_accuracy"] = report.slice_acc;
    j["subject_accuracy"] = report.subject_acc;
    j["ties"] = report.ties;
    std::vector<std::string> names;
    for (ClassLabel c : labels.classes) names.emplace_back(class_name(c));
    j["classes"] = names;
    j["confusion"] = report.confusion;
    return j.dump(2) + "\n";
}

std::string neighborhood_reports_json(const std::vector<NeighborhoodReport>& reports,
                                      const LabelMap& labels) {
    nlohmann::json arr = nlohmann::json::array();
    for (const NeighborhoodReport& r : reports) {
        nlohmann::json jr;
        jr["subject_id"] = r.subject_id;
        jr["true_class"] = class_name(labels.classes[static_cast<std::size_t>(r.true_class)]);
        nlohmann::json ks = nlohmann::json::array();
        for (std::size_t ki = 0; ki < r.k_values.size(); ++ki) {
            nlohmann::json entry;
            entry["k"] = r.k_values[ki];
            nlohmann::json counts;
            for (std::size_t c = 0; c < labels.num_classes(); ++c)
                counts[class_name(labels.classes[c])] = r.counts[ki][c];
            entry["counts"] = counts;
            ks.push_back(entry);
        }
        jr["neighborhoods"] = ks;
        arr.push_back(jr);
    }
    return arr.dump(2) + "\n";
}

std::string neighborhood_reports_text(const std::vector<NeighborhoodReport>& reports,
                                      const LabelMap& labels) {
    std::string out;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-12s %-6s", "subject", "true");
    out += buf;
    if (!reports.empty()) {
        for (std::size_t k : reports[0].k_values) {
            std::string col = "K=" + std::to_string(k);
            std::snprintf(buf, sizeof(buf), " %-16s", col.c_str());
            out += buf;
        }
    }
    out += '\n';
    for (const NeighborhoodReport& r : reports) {
        std::snprintf(buf, sizeof(buf), "%-12lld %-6s",
                      static_cast<long long>(r.subject_id),
                      class_name(labels.classes[static_cast<std::size_t>(r.true_class)]));
        out += buf;
        for (std::size_t ki = 0; ki < r.k_values.size(); ++ki) {
            std::string cell;
            for (std::size_t c = 0; c < labels.num_classes(); ++c) {
                if (c) cell += ' ';
                cell += class_name(labels.classes[c]);
                cell += ':' + std::to_string(r.counts[ki][c]);
            }
            std::snprintf(buf, sizeof(buf), " %-16s", cell.c_str());
            out += buf;
        }
        out += '\n';
    }
    return out;
}

}  // namespace biceph
