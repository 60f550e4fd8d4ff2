#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nck/loss.hpp"
#include "nck/matrix.hpp"
#include "nck/video.hpp"

namespace nck {

// Pluggable action-classifier contract. predict is deterministic for fixed
// state; predict_sampled estimates per-snippet mean and variance from
// jittered feature copies and is pure given an explicit sample seed.
class SnippetClassifier {
  public:
    virtual ~SnippetClassifier() = default;

    // targets run parallel to dataset: one soft value in [0,1] per snippet.
    // A zero-epoch budget validates inputs and leaves the state untouched.
    virtual void train(const Dataset& dataset, const std::vector<std::vector<double>>& targets,
                       std::size_t epochs) = 0;
    virtual std::vector<double> predict(const FeatureMatrix& x) const = 0;

    virtual NoisySnippetLabels predict_sampled(const FeatureMatrix& x, std::size_t m,
                                               double jitter, std::uint64_t sample_seed) const {
        if (m < 1) throw std::invalid_argument("predict_sampled: m must be >= 1");
        if (!std::isfinite(jitter) || jitter < 0.0)
            throw std::invalid_argument("predict_sampled: jitter must be >= 0");
        const std::size_t n = x.n_snippets();
        if (m == 1 || jitter == 0.0)
            return NoisySnippetLabels(predict(x), std::vector<double>(n, 0.0), m);

        std::mt19937_64 gen(mix_seed(sample_seed, 0x1a77e2ULL));
        std::normal_distribution<double> noise(0.0, jitter);
        std::vector<double> mean(n, 0.0), sum_sq(n, 0.0);
        for (std::size_t k = 0; k < m; ++k) {
            Matrix jittered(n, x.dim());
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < x.dim(); ++j) jittered(i, j) = x(i, j) + noise(gen);
            const auto p = predict(FeatureMatrix(std::move(jittered)));
            for (std::size_t i = 0; i < n; ++i) {
                mean[i] += p[i];
                sum_sq[i] += p[i] * p[i];
            }
        }
        std::vector<double> variance(n);
        for (std::size_t i = 0; i < n; ++i) {
            mean[i] /= double(m);
            const double ss = sum_sq[i] - double(m) * mean[i] * mean[i];
            variance[i] = std::max(0.0, ss / double(m - 1));
            mean[i] = std::clamp(mean[i], 0.0, 1.0);
        }
        return NoisySnippetLabels(std::move(mean), std::move(variance), m);
    }
};

struct BuiltinClassifierConfig {
    std::size_t hidden_width = 16;  // 0 selects plain logistic regression
    std::size_t epochs = 60;
    double lr = 0.01;
    double jitter_sigma = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("BuiltinClassifierConfig: epochs must be >= 1");
        if (!std::isfinite(lr) || lr <= 0.0)
            throw std::invalid_argument("BuiltinClassifierConfig: lr must be > 0");
        if (!std::isfinite(jitter_sigma) || jitter_sigma < 0.0)
            throw std::invalid_argument("BuiltinClassifierConfig: jitter_sigma must be >= 0");
    }
};

// One-hidden-layer net (or logistic regression) on snippet features, trained
// full batch with Adam on mean binary cross-entropy. Desk-scale stand-in for
// a heavyweight video action classifier.
class BuiltinSnippetClassifier final : public SnippetClassifier {
  public:
    explicit BuiltinSnippetClassifier(const BuiltinClassifierConfig& cfg, std::size_t feature_dim)
        : cfg_(cfg), feature_dim_(feature_dim) {
        cfg_.validate();
        if (feature_dim_ < 1)
            throw std::invalid_argument("BuiltinSnippetClassifier: feature_dim must be >= 1");
        const std::size_t h = cfg_.hidden_width;
        std::mt19937_64 gen(mix_seed(cfg_.seed, 0xc1a55ULL));
        if (h > 0) {
            w1_ = glorot(feature_dim_, h, gen);
            b1_.assign(h, 0.0);
            w2_ = glorot(h, 1, gen);
            b2_.assign(1, 0.0);
        } else {
            w1_ = glorot(feature_dim_, 1, gen);
            b1_.assign(1, 0.0);
        }
        reset_moments();
    }

    const BuiltinClassifierConfig& config() const { return cfg_; }
    std::size_t feature_dim() const { return feature_dim_; }
    std::uint64_t adam_step() const { return step_; }

    // Budget defaults to the configured epoch count.
    void train(const Dataset& dataset, const std::vector<std::vector<double>>& targets) {
        train(dataset, targets, cfg_.epochs);
    }

    void train(const Dataset& dataset, const std::vector<std::vector<double>>& targets,
               std::size_t epochs) override {
        if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
        if (targets.size() != dataset.size())
            throw std::invalid_argument("train: targets/dataset length mismatch");
        std::size_t total = 0;
        for (std::size_t v = 0; v < dataset.size(); ++v) {
            if (dataset[v].features.dim() != feature_dim_)
                throw std::invalid_argument("train: feature dimension mismatch");
            if (targets[v].size() != dataset[v].snippet_count())
                throw std::invalid_argument("train: target length mismatch for " + dataset[v].id);
            for (double t : targets[v])
                if (!std::isfinite(t) || t < 0.0 || t > 1.0)
                    throw std::invalid_argument("train: target outside [0,1]");
            total += dataset[v].snippet_count();
        }

        Matrix x(total, feature_dim_);
        std::vector<double> y(total);
        std::size_t row = 0;
        for (std::size_t v = 0; v < dataset.size(); ++v) {
            const Matrix& f = dataset[v].features.matrix();
            for (std::size_t i = 0; i < f.rows(); ++i, ++row) {
                for (std::size_t j = 0; j < feature_dim_; ++j) x(row, j) = f(i, j);
                y[row] = targets[v][i];
            }
        }

        for (std::size_t epoch = 0; epoch < epochs; ++epoch) train_epoch(x, y);
    }

    std::vector<double> predict(const FeatureMatrix& x) const override {
        if (x.dim() != feature_dim_)
            throw std::invalid_argument("predict: feature dimension mismatch");
        const std::vector<double> logits = forward_logits(x.matrix(), nullptr, nullptr);
        std::vector<double> p(logits.size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(logits[i]);
        return p;
    }

    // Checkpoint access: tensors in a fixed order with stable names.
    std::vector<std::string> tensor_names() const {
        if (cfg_.hidden_width > 0) return {"cls_w1", "cls_b1", "cls_w2", "cls_b2"};
        return {"cls_w1", "cls_b1"};
    }

    std::vector<std::vector<std::size_t>> tensor_dims() const {
        if (cfg_.hidden_width > 0)
            return {{w1_.rows(), w1_.cols()}, {b1_.size()}, {w2_.rows(), w2_.cols()}, {b2_.size()}};
        return {{w1_.rows(), w1_.cols()}, {b1_.size()}};
    }

    std::vector<std::span<double>> tensor_views() {
        if (cfg_.hidden_width > 0)
            return {std::span<double>(w1_.values()), std::span<double>(b1_),
                    std::span<double>(w2_.values()), std::span<double>(b2_)};
        return {std::span<double>(w1_.values()), std::span<double>(b1_)};
    }

    std::vector<std::span<const double>> tensor_views() const {
        if (cfg_.hidden_width > 0)
            return {std::span<const double>(w1_.values()), std::span<const double>(b1_),
                    std::span<const double>(w2_.values()), std::span<const double>(b2_)};
        return {std::span<const double>(w1_.values()), std::span<const double>(b1_)};
    }

  private:
    static Matrix glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& gen) {
        const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Matrix m(fan_in, fan_out);
        for (auto& v : m.values()) v = dist(gen);
        return m;
    }

    static double sigmoid(double z) {
        if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
        const double e = std::exp(z);
        return e / (1.0 + e);
    }

    void reset_moments() {
        auto zero_of = [](const Matrix& m) { return Matrix(m.rows(), m.cols()); };
        m_w1_ = zero_of(w1_);
        v_w1_ = zero_of(w1_);
        m_b1_.assign(b1_.size(), 0.0);
        v_b1_.assign(b1_.size(), 0.0);
        if (cfg_.hidden_width > 0) {
            m_w2_ = zero_of(w2_);
            v_w2_ = zero_of(w2_);
            m_b2_.assign(b2_.size(), 0.0);
            v_b2_.assign(b2_.size(), 0.0);
        }
        step_ = 0;
    }

    // Returns per-row logits; optionally captures the hidden pre-activations
    // and activations for backprop.
    std::vector<double> forward_logits(const Matrix& x, Matrix* pre_out, Matrix* hidden_out) const {
        const std::size_t n = x.rows();
        std::vector<double> logits(n, 0.0);
        if (cfg_.hidden_width == 0) {
            for (std::size_t i = 0; i < n; ++i) {
                double z = b1_[0];
                for (std::size_t j = 0; j < feature_dim_; ++j) z += x(i, j) * w1_(j, 0);
                logits[i] = z;
            }
            return logits;
        }
        Matrix pre = matmul(x, w1_);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < cfg_.hidden_width; ++j) pre(i, j) += b1_[j];
        Matrix hidden = pre;
        for (auto& v : hidden.values()) v = v > 0.0 ? v : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = b2_[0];
            for (std::size_t j = 0; j < cfg_.hidden_width; ++j) z += hidden(i, j) * w2_(j, 0);
            logits[i] = z;
        }
        if (pre_out) *pre_out = std::move(pre);
        if (hidden_out) *hidden_out = std::move(hidden);
        return logits;
    }

    void train_epoch(const Matrix& x, const std::vector<double>& y) {
        const std::size_t n = x.rows();
        Matrix pre(1, 1), hidden(1, 1);
        const std::vector<double> logits = forward_logits(x, &pre, &hidden);
        std::vector<double> dlogit(n);
        for (std::size_t i = 0; i < n; ++i) dlogit[i] = (sigmoid(logits[i]) - y[i]) / double(n);

        if (cfg_.hidden_width == 0) {
            Matrix g_w1(feature_dim_, 1);
            double g_b = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < feature_dim_; ++j) g_w1(j, 0) += x(i, j) * dlogit[i];
                g_b += dlogit[i];
            }
            ++step_;
            adam(w1_.values(), m_w1_.values(), v_w1_.values(), g_w1.values());
            std::vector<double> g_b1{g_b};
            adam(b1_, m_b1_, v_b1_, g_b1);
            return;
        }

        const std::size_t h = cfg_.hidden_width;
        Matrix g_w2(h, 1);
        double g_b2 = 0.0;
        Matrix d_hidden(x.rows(), h);
        for (std::size_t i = 0; i < n; ++i) {
            g_b2 += dlogit[i];
            for (std::size_t j = 0; j < h; ++j) {
                g_w2(j, 0) += hidden(i, j) * dlogit[i];
                d_hidden(i, j) = pre(i, j) > 0.0 ? dlogit[i] * w2_(j, 0) : 0.0;
            }
        }
        Matrix g_w1 = matmul_atb(x, d_hidden);
        std::vector<double> g_b1(h, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < h; ++j) g_b1[j] += d_hidden(i, j);

        ++step_;
        adam(w1_.values(), m_w1_.values(), v_w1_.values(), g_w1.values());
        adam(b1_, m_b1_, v_b1_, g_b1);
        adam(w2_.values(), m_w2_.values(), v_w2_.values(), g_w2.values());
        std::vector<double> g_b2v{g_b2};
        adam(b2_, m_b2_, v_b2_, g_b2v);
    }

    void adam(std::span<double> theta, std::span<double> m, std::span<double> v,
              std::span<const double> g) {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        const double bc1 = 1.0 - std::pow(beta1, double(step_));
        const double bc2 = 1.0 - std::pow(beta2, double(step_));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            theta[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }

    BuiltinClassifierConfig cfg_;
    std::size_t feature_dim_;
    Matrix w1_{1, 1}, w2_{1, 1};
    std::vector<double> b1_, b2_;
    Matrix m_w1_{1, 1}, v_w1_{1, 1}, m_w2_{1, 1}, v_w2_{1, 1};
    std::vector<double> m_b1_, v_b1_, m_b2_, v_b2_;
    std::uint64_t step_ = 0;
};

}  // namespace nck
