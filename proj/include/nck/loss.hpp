#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace nck {

inline constexpr double kProbEpsilon = 1e-7;
inline constexpr double kDefaultConfidenceFraction = 0.5;
inline constexpr double kDefaultEmaAlpha = 0.6;

// Rough snippet-wise targets produced by the action classifier: per-snippet
// sample means and variances estimated from n_samples jittered predictions.
struct NoisySnippetLabels {
    std::vector<double> mean;
    std::vector<double> variance;
    std::size_t n_samples = 1;

    NoisySnippetLabels() = default;
    NoisySnippetLabels(std::vector<double> mean_in, std::vector<double> variance_in,
                       std::size_t n_samples_in)
        : mean(std::move(mean_in)), variance(std::move(variance_in)), n_samples(n_samples_in) {
        if (mean.size() != variance.size())
            throw std::invalid_argument("NoisySnippetLabels: mean/variance length mismatch");
        if (n_samples < 1) throw std::invalid_argument("NoisySnippetLabels: n_samples must be >= 1");
        for (double m : mean)
            if (!std::isfinite(m) || m < 0.0 || m > 1.0)
                throw std::invalid_argument("NoisySnippetLabels: mean outside [0,1]");
        for (double v : variance) {
            if (!std::isfinite(v) || v < 0.0)
                throw std::invalid_argument("NoisySnippetLabels: negative variance");
            if (n_samples == 1 && v != 0.0)
                throw std::invalid_argument("NoisySnippetLabels: nonzero variance with one sample");
        }
    }

    std::size_t size() const { return mean.size(); }
};

struct HighConfidenceSet {
    std::vector<std::size_t> indices;
    double fraction = kDefaultConfidenceFraction;
};

struct EmaState {
    std::vector<double> p_bar;
    double alpha = kDefaultEmaAlpha;
    bool initialized = false;
};

struct LossTerm {
    double value = 0.0;
    std::vector<double> grad;
};

struct TotalLoss {
    double value = 0.0;
    double direct = 0.0;
    double indirect = 0.0;
    std::vector<double> grad;
};

// Picks the max(1, floor(fraction*N)) snippets with the smallest prediction
// variance; ties resolve toward the smaller index.
inline HighConfidenceSet select_high_confidence(const NoisySnippetLabels& labels,
                                                double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw std::invalid_argument("select_high_confidence: fraction must be in (0,1]");
    const std::size_t n = labels.size();
    if (n == 0) throw std::invalid_argument("select_high_confidence: empty labels");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return labels.variance[a] < labels.variance[b];
    });

    const std::size_t count =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * double(n))));
    order.resize(std::min(count, n));
    std::sort(order.begin(), order.end());
    return HighConfidenceSet{std::move(order), fraction};
}

inline double clamp_to_unit(double p) {
    return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

// Cross-entropy against the classifier targets, restricted to the
// high-confidence set. Probabilities are clamped to [eps, 1-eps] before the
// logs so saturated inputs stay finite.
inline LossTerm direct_loss(const std::vector<double>& p, const NoisySnippetLabels& labels,
                            const HighConfidenceSet& h) {
    if (p.size() != labels.size())
        throw std::invalid_argument("direct_loss: prediction/label length mismatch");
    if (h.indices.empty()) throw std::invalid_argument("direct_loss: empty high-confidence set");

    LossTerm out;
    out.grad.assign(p.size(), 0.0);
    const double inv_h = 1.0 / double(h.indices.size());
    for (std::size_t i : h.indices) {
        if (i >= p.size()) throw std::invalid_argument("direct_loss: index out of range");
        if (!std::isfinite(p[i])) throw std::invalid_argument("direct_loss: non-finite prediction");
        const double pc = clamp_to_unit(p[i]);
        const double y = labels.mean[i];
        out.value -= inv_h * (y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
        out.grad[i] = (pc - y) * inv_h / (pc * (1.0 - pc));
    }
    return out;
}

// Temporal-ensembling term: mean absolute deviation from the EMA of past
// cleaner predictions, with the sign subgradient (0 at exact agreement).
inline LossTerm indirect_loss(const std::vector<double>& p, const EmaState& ema) {
    if (!ema.initialized) throw std::invalid_argument("indirect_loss: EMA not initialized");
    if (p.size() != ema.p_bar.size())
        throw std::invalid_argument("indirect_loss: prediction/EMA length mismatch");
    if (p.empty()) throw std::invalid_argument("indirect_loss: empty predictions");

    LossTerm out;
    out.grad.assign(p.size(), 0.0);
    const double inv_n = 1.0 / double(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i])) throw std::invalid_argument("indirect_loss: non-finite prediction");
        const double diff = p[i] - ema.p_bar[i];
        out.value += inv_n * std::abs(diff);
        if (diff > 0.0)
            out.grad[i] = inv_n;
        else if (diff < 0.0)
            out.grad[i] = -inv_n;
    }
    return out;
}

inline TotalLoss total_loss(const std::vector<double>& p, const NoisySnippetLabels& labels,
                            const HighConfidenceSet& h, const EmaState& ema) {
    const LossTerm d = direct_loss(p, labels, h);
    const LossTerm ind = indirect_loss(p, ema);
    TotalLoss out;
    out.direct = d.value;
    out.indirect = ind.value;
    out.value = d.value + ind.value;
    out.grad.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out.grad[i] = d.grad[i] + ind.grad[i];
    return out;
}

// Warm start: the running average begins at the classifier means instead of
// zero, so no bias correction is applied later.
inline EmaState init_ema(const NoisySnippetLabels& labels, double alpha) {
    if (!(alpha >= 0.0) || alpha >= 1.0)
        throw std::invalid_argument("init_ema: alpha must be in [0,1)");
    return EmaState{labels.mean, alpha, true};
}

inline void update_ema(EmaState& ema, const std::vector<double>& p) {
    if (!ema.initialized) throw std::invalid_argument("update_ema: EMA not initialized");
    if (p.size() != ema.p_bar.size())
        throw std::invalid_argument("update_ema: length mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i])) throw std::invalid_argument("update_ema: non-finite prediction");
        ema.p_bar[i] = ema.alpha * ema.p_bar[i] + (1.0 - ema.alpha) * p[i];
    }
}

}  // namespace nck
