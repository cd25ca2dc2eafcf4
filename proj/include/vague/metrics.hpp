#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vague/corpus.hpp"

namespace vague::metrics {

// All metric values are fractions in [0, 1]; multiply by 100 for display.

struct ClassPrf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct PrfReport {
    std::array<ClassPrf, corpus::kNumClasses> per_class{};
    double weighted_precision = 0.0; // support-weighted across classes
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    std::size_t total = 0;

    nlohmann::json to_json() const;
};

// Four-class support-weighted precision/recall/F1. Labels must be in 0..3.
// Empty-support classes and zero denominators contribute zero.
PrfReport weighted_prf(const std::vector<int>& truth, const std::vector<int>& pred);

// Mean of the weighted metrics across folds (per-class metrics averaged,
// supports summed).
PrfReport mean_reports(const std::vector<PrfReport>& reports);

struct BinaryPrf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t true_positives = 0;
    std::size_t predicted_positives = 0;
    std::size_t actual_positives = 0;

    nlohmann::json to_json() const;
};

// Positive-class (label 1) precision/recall/F1 for token-level tagging.
BinaryPrf binary_prf(const std::vector<int>& truth, const std::vector<int>& pred);

struct ConfusionMatrix {
    // counts[true class][predicted class]
    std::array<std::array<std::size_t, corpus::kNumClasses>, corpus::kNumClasses> counts{};

    // Rows sum to 1 across predictions for each true class (zero rows stay zero).
    std::array<std::array<double, corpus::kNumClasses>, corpus::kNumClasses>
    true_normalized() const;
    // For each predicted (system) class, the distribution over true classes.
    std::array<std::array<double, corpus::kNumClasses>, corpus::kNumClasses>
    system_normalized() const;

    nlohmann::json to_json() const;
};

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& pred);

struct RocCurve {
    std::vector<std::pair<double, double>> points; // (fpr, tpr), starts at (0,0)
    double auc = 0.0;
};

// ROC curve by descending-score sweep with tied scores grouped; AUC by
// trapezoid rule, which equals the Mann-Whitney U statistic with half
// credit for ties. Requires at least one positive and one negative label.
RocCurve roc_auc(const std::vector<int>& truth, const std::vector<double>& scores);

// Pearson correlation; requires n >= 2 and nonzero variance on both sides.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

} // namespace vague::metrics
