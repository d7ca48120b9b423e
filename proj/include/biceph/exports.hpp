#pragma once

#include <string>
#include <vector>

#include "biceph/checkpoint.hpp"
#include "biceph/eval.hpp"
#include "biceph/model.hpp"

namespace biceph {

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochStats& row);
std::string metrics_csv(const std::vector<EpochStats>& rows);

std::string embeddings_csv(const std::vector<SlicePrediction>& preds, const LabelMap& labels);
std::string pca_csv(const std::vector<SlicePrediction>& preds, const Matrix& coords,
                    const LabelMap& labels);

struct EvaluationReport {
    std::string split;
    std::size_t subjects = 0;
    std::size_t slices = 0;
    double slice_acc = 0.0;
    double subject_acc = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    std::size_t ties = 0;
};

EvaluationReport build_evaluation_report(const std::string& split,
                                         const std::vector<SlicePrediction>& preds,
                                         const LabelMap& labels);
std::string evaluation_report_json(const EvaluationReport& report, const LabelMap& labels);

std::string neighborhood_reports_json(const std::vector<NeighborhoodReport>& reports,
                                      const LabelMap& labels);
std::string neighborhood_reports_text(const std::vector<NeighborhoodReport>& reports,
                                      const LabelMap& labels);

}  // namespace biceph
