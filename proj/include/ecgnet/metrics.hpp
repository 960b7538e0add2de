#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ecgnet/common.hpp"

namespace ecgnet {

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double specificity = 0.0;
    double auc = 1.0;
    std::vector<std::vector<long>> confusion; // [truth][prediction]
};

/// Probability that a random positive is ranked above a random negative,
/// ties counted 1/2 (midrank formulation; equals the trapezoidal ROC area).
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& truths) {
    if (scores.size() != truths.size() || scores.empty())
        throw UsageError("roc_auc: parallel nonempty arrays required");
    std::size_t n_pos = 0;
    for (int t : truths) n_pos += (t != 0);
    const std::size_t n_neg = truths.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("roc_auc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j); // ranks are 1-based
        for (std::size_t t = i; t < j; ++t)
            if (truths[order[t]] != 0) rank_sum_pos += midrank;
        i = j;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

namespace detail {

struct OvrCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Zero-denominator convention: 1.0 when the denominator class is absent and
/// no pertinent errors were made, else 0.0.
inline double safe_ratio(long num, long denom, long errors_if_absent) {
    if (denom == 0) return errors_if_absent == 0 ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(denom);
}

inline void scalar_metrics(const OvrCounts& c, double& precision, double& recall,
                           double& specificity, double& f1) {
    precision = safe_ratio(c.tp, c.tp + c.fp, c.fn);
    recall = safe_ratio(c.tp, c.tp + c.fn, c.fp);
    specificity = safe_ratio(c.tn, c.tn + c.fp, c.fn);
    f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

} // namespace detail

/// Confusion matrix plus derived scalars. Binary problems use the
/// positive-class-1 convention; multiclass metrics are macro-averaged
/// one-vs-rest. `class_scores` (n x K, may be empty) feeds the AUC: class-1
/// score column for binary, macro one-vs-rest over classes present otherwise.
inline Metrics compute_metrics(const std::vector<int>& predictions,
                               const std::vector<std::vector<double>>& class_scores,
                               const std::vector<int>& truths) {
    if (predictions.size() != truths.size() || predictions.empty())
        throw UsageError("compute_metrics: parallel nonempty arrays required");
    int max_label = 1;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (predictions[i] < 0 || truths[i] < 0)
            throw UsageError("compute_metrics: labels must be non-negative");
        max_label = std::max({max_label, predictions[i], truths[i]});
    }
    const std::size_t k = static_cast<std::size_t>(max_label) + 1;

    Metrics m;
    m.confusion.assign(k, std::vector<long>(k, 0));
    long correct = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        ++m.confusion[static_cast<std::size_t>(truths[i])][static_cast<std::size_t>(predictions[i])];
        correct += (truths[i] == predictions[i]);
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(truths.size());

    auto ovr = [&](std::size_t cls) {
        detail::OvrCounts c;
        for (std::size_t t = 0; t < k; ++t)
            for (std::size_t p = 0; p < k; ++p) {
                const long n = m.confusion[t][p];
                if (t == cls && p == cls) c.tp += n;
                else if (t == cls) c.fn += n;
                else if (p == cls) c.fp += n;
                else c.tn += n;
            }
        return c;
    };

    if (k == 2) {
        detail::scalar_metrics(ovr(1), m.precision, m.recall, m.specificity, m.f1);
    } else {
        double sp = 0, sr = 0, ss = 0, sf = 0;
        for (std::size_t cls = 0; cls < k; ++cls) {
            double p, r, s, f;
            detail::scalar_metrics(ovr(cls), p, r, s, f);
            sp += p; sr += r; ss += s; sf += f;
        }
        const double kd = static_cast<double>(k);
        m.precision = sp / kd;
        m.recall = sr / kd;
        m.specificity = ss / kd;
        m.f1 = sf / kd;
    }

    m.auc = 1.0; // vacuous when no ranking is scorable
    if (!class_scores.empty()) {
        if (class_scores.size() != truths.size())
            throw UsageError("compute_metrics: score rows must parallel the labels");
        if (k == 2) {
            std::vector<double> s1(truths.size());
            for (std::size_t i = 0; i < truths.size(); ++i) {
                if (class_scores[i].size() < 2)
                    throw UsageError("compute_metrics: need a score per class");
                s1[i] = class_scores[i][1];
            }
            bool both = false;
            for (std::size_t i = 1; i < truths.size(); ++i)
                if (truths[i] != truths[0]) { both = true; break; }
            if (both) m.auc = roc_auc(s1, truths);
        } else {
            double acc = 0.0;
            std::size_t counted = 0;
            for (std::size_t cls = 0; cls < k; ++cls) {
                std::vector<double> sc(truths.size());
                std::vector<int> tv(truths.size());
                std::size_t pos = 0;
                for (std::size_t i = 0; i < truths.size(); ++i) {
                    if (class_scores[i].size() < k)
                        throw UsageError("compute_metrics: need a score per class");
                    sc[i] = class_scores[i][cls];
                    tv[i] = truths[i] == static_cast<int>(cls) ? 1 : 0;
                    pos += static_cast<std::size_t>(tv[i]);
                }
                if (pos == 0 || pos == truths.size()) continue;
                acc += roc_auc(sc, tv);
                ++counted;
            }
            if (counted > 0) m.auc = acc / static_cast<double>(counted);
        }
    }
    return m;
}

inline Metrics compute_metrics(const std::vector<int>& predictions,
                               const std::vector<int>& truths) {
    return compute_metrics(predictions, {}, truths);
}

} // namespace ecgnet
