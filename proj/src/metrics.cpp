#include "vague/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "vague/errors.hpp"

namespace vague::metrics {

namespace {

void check_labels(const std::vector<int>& truth, const std::vector<int>& pred,
                  int max_label) {
    if (truth.empty()) throw DataError("metrics: empty input");
    if (truth.size() != pred.size())
        throw UsageError("metrics: " + std::to_string(truth.size()) + " truth vs " +
                         std::to_string(pred.size()) + " predicted labels");
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] < 0 || truth[i] > max_label || pred[i] < 0 || pred[i] > max_label)
            throw DataError("metrics: label outside 0.." + std::to_string(max_label) +
                            " at index " + std::to_string(i));
}

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

} // namespace

PrfReport weighted_prf(const std::vector<int>& truth, const std::vector<int>& pred) {
    constexpr int k = static_cast<int>(corpus::kNumClasses);
    check_labels(truth, pred, k - 1);

    std::array<std::size_t, corpus::kNumClasses> tp{}, fp{}, fn{}, support{};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++support[truth[i]];
        if (truth[i] == pred[i]) ++tp[truth[i]];
        else {
            ++fp[pred[i]];
            ++fn[truth[i]];
        }
    }

    PrfReport r;
    r.total = truth.size();
    for (int c = 0; c < k; ++c) {
        ClassPrf& m = r.per_class[c];
        m.support = support[c];
        m.precision = safe_div(tp[c], tp[c] + fp[c]);
        m.recall = safe_div(tp[c], tp[c] + fn[c]);
        m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall);
        double w = static_cast<double>(support[c]) / static_cast<double>(r.total);
        r.weighted_precision += w * m.precision;
        r.weighted_recall += w * m.recall;
        r.weighted_f1 += w * m.f1;
    }
    return r;
}

PrfReport mean_reports(const std::vector<PrfReport>& reports) {
    if (reports.empty()) throw DataError("metrics: no reports to average");
    PrfReport out;
    for (const PrfReport& r : reports) {
        out.weighted_precision += r.weighted_precision;
        out.weighted_recall += r.weighted_recall;
        out.weighted_f1 += r.weighted_f1;
        out.total += r.total;
        for (std::size_t c = 0; c < corpus::kNumClasses; ++c) {
            out.per_class[c].precision += r.per_class[c].precision;
            out.per_class[c].recall += r.per_class[c].recall;
            out.per_class[c].f1 += r.per_class[c].f1;
            out.per_class[c].support += r.per_class[c].support;
        }
    }
    double n = static_cast<double>(reports.size());
    out.weighted_precision /= n;
    out.weighted_recall /= n;
    out.weighted_f1 /= n;
    for (auto& m : out.per_class) {
        m.precision /= n;
        m.recall /= n;
        m.f1 /= n;
    }
    return out;
}

nlohmann::json PrfReport::to_json() const {
    nlohmann::json j;
    j["weighted_precision"] = weighted_precision;
    j["weighted_recall"] = weighted_recall;
    j["weighted_f1"] = weighted_f1;
    j["total"] = total;
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t c = 0; c < corpus::kNumClasses; ++c) {
        const ClassPrf& m = per_class[c];
        per[corpus::class_name(static_cast<corpus::VaguenessClass>(c))] = {
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"support", m.support},
        };
    }
    j["per_class"] = per;
    return j;
}

BinaryPrf binary_prf(const std::vector<int>& truth, const std::vector<int>& pred) {
    check_labels(truth, pred, 1);
    BinaryPrf r;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (pred[i] == 1) ++r.predicted_positives;
        if (truth[i] == 1) ++r.actual_positives;
        if (truth[i] == 1 && pred[i] == 1) ++r.true_positives;
    }
    r.precision = safe_div(r.true_positives, r.predicted_positives);
    r.recall = safe_div(r.true_positives, r.actual_positives);
    r.f1 = safe_div(2.0 * r.precision * r.recall, r.precision + r.recall);
    return r;
}

nlohmann::json BinaryPrf::to_json() const {
    return {{"precision", precision},
            {"recall", recall},
            {"f1", f1},
            {"true_positives", true_positives},
            {"predicted_positives", predicted_positives},
            {"actual_positives", actual_positives}};
}

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& pred) {
    check_labels(truth, pred, static_cast<int>(corpus::kNumClasses) - 1);
    ConfusionMatrix m;
    for (std::size_t i = 0; i < truth.size(); ++i) ++m.counts[truth[i]][pred[i]];
    return m;
}

std::array<std::array<double, corpus::kNumClasses>, corpus::kNumClasses>
ConfusionMatrix::true_normalized() const {
    std::array<std::array<double, corpus::kNumClasses>, corpus::kNumClasses> out{};
    for (std::size_t t = 0; t < corpus::kNumClasses; ++t) {
        std::size_t row = 0;
        for (std::size_t p = 0; p < corpus::kNumClasses; ++p) row += counts[t][p];
        if (row == 0) continue;
        for (std::size_t p = 0; p < corpus::kNumClasses; ++p)
            out[t][p] = static_cast<double>(counts[t][p]) / static_cast<double>(row);
    }
    return out;
}

std::array<std::array<double, corpus::kNumClasses>, corpus::kNumClasses>
ConfusionMatrix::system_normalized() const {
    std::array<std::array<double, corpus::kNumClasses>, corpus::kNumClasses> out{};
    for (std::size_t p = 0; p < corpus::kNumClasses; ++p) {
        std::size_t col = 0;
        for (std::size_t t = 0; t < corpus::kNumClasses; ++t) col += counts[t][p];
        if (col == 0) continue;
        // row = system class, entries = distribution over true classes
        for (std::size_t t = 0; t < corpus::kNumClasses; ++t)
            out[p][t] = static_cast<double>(counts[t][p]) / static_cast<double>(col);
    }
    return out;
}

nlohmann::json ConfusionMatrix::to_json() const {
    nlohmann::json j;
    j["counts"] = counts;
    j["true_normalized"] = true_normalized();
    j["system_normalized"] = system_normalized();
    return j;
}

RocCurve roc_auc(const std::vector<int>& truth, const std::vector<double>& scores) {
    check_labels(truth, std::vector<int>(truth.size(), 0), 1);
    if (truth.size() != scores.size())
        throw UsageError("roc_auc: " + std::to_string(truth.size()) + " labels vs " +
                         std::to_string(scores.size()) + " scores");
    for (double s : scores)
        if (!std::isfinite(s)) throw DataError("roc_auc: non-finite score");

    std::size_t pos = 0, neg = 0;
    for (int t : truth) (t == 1 ? pos : neg)++;
    if (pos == 0 || neg == 0)
        throw DataError("roc_auc: need at least one positive and one negative label");

    std::vector<std::size_t> order(truth.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocCurve curve;
    curve.points.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fpos = 0;
    double auc = 0.0, prev_fpr = 0.0, prev_tpr = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        // advance through the whole group of tied scores at once
        double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (truth[order[i]] == 1) ++tp;
            else ++fpos;
            ++i;
        }
        double fpr = static_cast<double>(fpos) / static_cast<double>(neg);
        double tpr = static_cast<double>(tp) / static_cast<double>(pos);
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        curve.points.emplace_back(fpr, tpr);
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    curve.auc = auc;
    return curve;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw UsageError("pearson: length mismatch " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
    if (x.size() < 2) throw DataError("pearson: need at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DataError("pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

} // namespace vague::metrics
