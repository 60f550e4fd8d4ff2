#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nck {

// One point per distinct score threshold plus the (0,0) endpoint at
// threshold +inf. Alarms fire at score >= threshold.
struct RocCurve {
    std::vector<double> thresholds;
    std::vector<double> fpr;
    std::vector<double> tpr;

    std::size_t size() const { return thresholds.size(); }
};

namespace detail {

inline void check_scored_labels(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("metrics: score/label length mismatch");
    if (scores.empty()) throw std::invalid_argument("metrics: empty input");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("metrics: non-finite score");
    for (int l : labels)
        if (l != 0 && l != 1) throw std::invalid_argument("metrics: labels must be 0 or 1");
}

}  // namespace detail

inline RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
    detail::check_scored_labels(scores, labels);
    const std::size_t n_pos = std::size_t(std::count(labels.begin(), labels.end(), 1));
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("roc_curve: need at least one positive and one negative");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);

    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]] == 1)
                ++tp;
            else
                ++fp;
            ++i;
        }
        curve.thresholds.push_back(s);
        curve.fpr.push_back(double(fp) / double(n_neg));
        curve.tpr.push_back(double(tp) / double(n_pos));
    }
    return curve;
}

// Trapezoidal area under the ROC curve; equals the Mann-Whitney statistic
// P(score+ > score-) + P(tie)/2.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    const RocCurve curve = roc_curve(scores, labels);
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        area += (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]) * 0.5;
    return area;
}

inline double trapezoid_area(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        area += (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]) * 0.5;
    return area;
}

// Fraction of negative-label snippets whose score reaches the alarm
// threshold.
inline double false_alarm_rate(const std::vector<double>& scores, const std::vector<int>& labels,
                               double threshold = 0.5) {
    detail::check_scored_labels(scores, labels);
    if (!std::isfinite(threshold))
        throw std::invalid_argument("false_alarm_rate: non-finite threshold");
    std::size_t negatives = 0, alarms = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 0) continue;
        ++negatives;
        if (scores[i] >= threshold) ++alarms;
    }
    if (negatives == 0) throw std::invalid_argument("false_alarm_rate: no negative labels");
    return double(alarms) / double(negatives);
}

inline std::string roc_to_csv(const RocCurve& curve) {
    std::ostringstream out;
    out.precision(17);
    out << "threshold,fpr,tpr\n";
    for (std::size_t i = 0; i < curve.size(); ++i)
        out << curve.thresholds[i] << ',' << curve.fpr[i] << ',' << curve.tpr[i] << '\n';
    return out.str();
}

}  // namespace nck
