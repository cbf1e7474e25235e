#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adsim/errors.hpp"

namespace adsim {

enum class FitKind { classifier, regression };

// One row of the model-performance table. Population (divide by n)
// conventions throughout, so R^2 == 1 - RMSE^2 / sigma_y^2 holds exactly.
struct FitReport {
    FitKind kind = FitKind::regression;
    std::string target;
    std::string stage;  // "baseline" or "autoregression"
    std::string split;  // "train" or "holdout"
    std::size_t n = 0;

    // classifier
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::size_t n_classes = 0;

    // regression
    double r2 = 0.0;
    double rmse = 0.0;
    double sigma_y = 0.0;
};

inline FitReport classification_report(std::span<const std::size_t> predictions,
                                       std::span<const std::size_t> truths) {
    if (truths.empty()) throw EmptyInput("no observations");
    if (predictions.size() != truths.size()) throw DataError("LengthMismatch", "prediction/truth lengths differ");

    FitReport report;
    report.kind = FitKind::classifier;
    report.n = truths.size();

    std::map<std::size_t, std::size_t> tp, fp, fn;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (predictions[i] == truths[i]) {
            ++correct;
            ++tp[truths[i]];
        } else {
            ++fp[predictions[i]];
            ++fn[truths[i]];
        }
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(truths.size());

    // Macro-F1 over classes present in the truth labels only.
    std::map<std::size_t, bool> in_truth;
    for (auto t : truths) in_truth[t] = true;
    report.n_classes = in_truth.size();
    double f1_sum = 0.0;
    for (const auto& [cls, _] : in_truth) {
        double tp_c = static_cast<double>(tp.count(cls) ? tp[cls] : 0);
        double fp_c = static_cast<double>(fp.count(cls) ? fp[cls] : 0);
        double fn_c = static_cast<double>(fn.count(cls) ? fn[cls] : 0);
        double denom = 2.0 * tp_c + fp_c + fn_c;
        f1_sum += denom > 0.0 ? 2.0 * tp_c / denom : 0.0;
    }
    report.macro_f1 = f1_sum / static_cast<double>(in_truth.size());
    return report;
}

inline FitReport regression_report(std::span<const double> predictions,
                                   std::span<const double> truths) {
    if (truths.empty()) throw EmptyInput("no observations");
    if (predictions.size() != truths.size()) throw DataError("LengthMismatch", "prediction/truth lengths differ");

    FitReport report;
    report.kind = FitKind::regression;
    report.n = truths.size();

    double mean = 0.0;
    for (double t : truths) mean += t;
    mean /= static_cast<double>(truths.size());

    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        sse += (predictions[i] - truths[i]) * (predictions[i] - truths[i]);
        sst += (truths[i] - mean) * (truths[i] - mean);
    }
    report.rmse = std::sqrt(sse / static_cast<double>(truths.size()));
    report.sigma_y = std::sqrt(sst / static_cast<double>(truths.size()));
    if (sst > 0.0) {
        report.r2 = 1.0 - sse / sst;
    } else {
        report.r2 = sse == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    }
    return report;
}

}  // namespace adsim
