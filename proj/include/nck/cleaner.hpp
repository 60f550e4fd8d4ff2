// The label noise cleaner: two fully connected compression layers feeding
// one graph-convolution branch per adjacency operator, average-pool fusion
// of the branch logits, and a sigmoid output per snippet. Forward, the
// hand-derived backward pass, and in-place optimizer updates live here.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nck/graph.hpp"
#include "nck/matrix.hpp"

namespace nck {

enum class Activation { relu, tanh };
enum class BranchSet { both, feature_only, temporal_only };
enum class OptimizerKind { adam, sgd };

struct CleanerConfig {
    std::size_t raw_dim = 0;
    std::size_t comp_hidden = 512;  // first compression width
    std::size_t comp_out = 128;     // second compression width, input to the graph layers
    std::size_t gcn_hidden = 32;
    std::size_t gcn_layers = 2;     // per branch; the last layer always has width 1
    Activation activation = Activation::relu;
    BranchSet branches = BranchSet::both;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::uint64_t seed = 0;

    std::size_t branch_count() const { return branches == BranchSet::both ? 2 : 1; }
    bool has_feature_branch() const { return branches != BranchSet::temporal_only; }
    bool has_temporal_branch() const { return branches != BranchSet::feature_only; }

    void validate() const {
        if (raw_dim < 1) throw std::invalid_argument("CleanerConfig: raw_dim must be >= 1");
        if (comp_hidden < 1 || comp_out < 1)
            throw std::invalid_argument("CleanerConfig: compression widths must be >= 1");
        if (gcn_hidden < 1) throw std::invalid_argument("CleanerConfig: gcn_hidden must be >= 1");
        if (gcn_layers < 1) throw std::invalid_argument("CleanerConfig: gcn_layers must be >= 1");
    }

    // Output width of graph layer `layer` within a branch.
    std::size_t gcn_out_width(std::size_t layer) const {
        return layer + 1 == gcn_layers ? 1 : gcn_hidden;
    }
    std::size_t gcn_in_width(std::size_t layer) const {
        return layer == 0 ? comp_out : gcn_hidden;
    }
};

// One tensor per entry, shapes mirroring CleanerParams. Used both for
// gradients and for the optimizer moment accumulators.
struct CleanerGradients {
    Matrix comp_w1, comp_w2;
    std::vector<double> comp_b1, comp_b2;
    std::vector<Matrix> gcn_feature, gcn_temporal;
};

struct CleanerParams {
    CleanerConfig config;
    Matrix comp_w1, comp_w2;
    std::vector<double> comp_b1, comp_b2;
    std::vector<Matrix> gcn_feature, gcn_temporal;

    CleanerGradients moment1, moment2;  // Adam state
    std::uint64_t step = 0;
};

namespace detail {

inline CleanerGradients zero_like_tensors(const CleanerConfig& cfg) {
    CleanerGradients g;
    g.comp_w1 = Matrix(cfg.raw_dim, cfg.comp_hidden);
    g.comp_b1.assign(cfg.comp_hidden, 0.0);
    g.comp_w2 = Matrix(cfg.comp_hidden, cfg.comp_out);
    g.comp_b2.assign(cfg.comp_out, 0.0);
    auto make_stack = [&cfg]() {
        std::vector<Matrix> stack;
        stack.reserve(cfg.gcn_layers);
        for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
            stack.emplace_back(cfg.gcn_in_width(l), cfg.gcn_out_width(l));
        }
        return stack;
    };
    if (cfg.has_feature_branch()) g.gcn_feature = make_stack();
    if (cfg.has_temporal_branch()) g.gcn_temporal = make_stack();
    return g;
}

// Flat views over every tensor in canonical order. The order defines the
// checkpoint layout and the optimizer pairing, so it must stay stable:
// comp_w1, comp_b1, comp_w2, comp_b2, feature stack, temporal stack.
template <class Tensors>
std::vector<std::span<double>> tensor_views(Tensors& t) {
    std::vector<std::span<double>> views;
    views.push_back(t.comp_w1.values());
    views.push_back(std::span<double>(t.comp_b1));
    views.push_back(t.comp_w2.values());
    views.push_back(std::span<double>(t.comp_b2));
    for (auto& w : t.gcn_feature) views.push_back(w.values());
    for (auto& w : t.gcn_temporal) views.push_back(w.values());
    return views;
}

template <class Tensors>
std::vector<std::span<const double>> tensor_views(const Tensors& t) {
    std::vector<std::span<const double>> views;
    views.push_back(t.comp_w1.values());
    views.push_back(std::span<const double>(t.comp_b1));
    views.push_back(t.comp_w2.values());
    views.push_back(std::span<const double>(t.comp_b2));
    for (const auto& w : t.gcn_feature) views.push_back(w.values());
    for (const auto& w : t.gcn_temporal) views.push_back(w.values());
    return views;
}

inline std::vector<std::string> tensor_names(const CleanerConfig& cfg) {
    std::vector<std::string> names = {"comp_w1", "comp_b1", "comp_w2", "comp_b2"};
    if (cfg.has_feature_branch())
        for (std::size_t l = 0; l < cfg.gcn_layers; ++l)
            names.push_back("gcn_f_" + std::to_string(l));
    if (cfg.has_temporal_branch())
        for (std::size_t l = 0; l < cfg.gcn_layers; ++l)
            names.push_back("gcn_t_" + std::to_string(l));
    return names;
}

inline double activate(Activation act, double z) {
    switch (act) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::tanh: return std::tanh(z);
    }
    return z;
}

inline double activate_grad(Activation act, double z) {
    switch (act) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Keeps probabilities strictly inside (0,1) even at saturated logits.
inline double clamp_prob(double p) {
    constexpr double lo = 1e-15;
    return p < lo ? lo : (p > 1.0 - lo ? 1.0 - lo : p);
}

inline void glorot_fill(Matrix& w, std::mt19937_64& gen) {
    const double bound = std::sqrt(6.0 / double(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : w.values()) v = dist(gen);
}

}  // namespace detail

// Deterministic per seed: weights are scaled-uniform with bound
// sqrt(6/(fan_in+fan_out)), biases zero, optimizer state zero.
inline CleanerParams init_params(const CleanerConfig& config) {
    config.validate();
    CleanerParams p;
    p.config = config;
    auto shapes = detail::zero_like_tensors(config);
    p.comp_w1 = shapes.comp_w1;
    p.comp_b1 = shapes.comp_b1;
    p.comp_w2 = shapes.comp_w2;
    p.comp_b2 = shapes.comp_b2;
    p.gcn_feature = shapes.gcn_feature;
    p.gcn_temporal = shapes.gcn_temporal;
    p.moment1 = detail::zero_like_tensors(config);
    p.moment2 = detail::zero_like_tensors(config);

    std::mt19937_64 gen(config.seed);
    detail::glorot_fill(p.comp_w1, gen);
    detail::glorot_fill(p.comp_w2, gen);
    for (auto& w : p.gcn_feature) detail::glorot_fill(w, gen);
    for (auto& w : p.gcn_temporal) detail::glorot_fill(w, gen);
    return p;
}

struct BranchTrace {
    std::vector<Matrix> inputs;   // Z_l entering each layer
    std::vector<Matrix> preacts;  // A_hat * (Z_l W_l) before activation
};

struct ForwardTrace {
    std::size_t n = 0;
    Matrix features;
    Matrix comp_pre1;     // X W1 + b1
    Matrix comp_hidden;   // act(comp_pre1)
    Matrix compressed;    // Z = comp_hidden W2 + b2 (no activation)
    RenormalizedAdjacency op_feature, op_temporal;
    BranchTrace feature, temporal;
    std::vector<double> fused_logit;
    std::vector<double> prob;  // sigmoid of fused logit, clamped inside (0,1)
};

namespace detail {

inline void run_branch(const Matrix& compressed, const RenormalizedAdjacency& op,
                       const std::vector<Matrix>& stack, const CleanerConfig& cfg,
                       BranchTrace& out) {
    out.inputs.clear();
    out.preacts.clear();
    Matrix z = compressed;
    for (std::size_t l = 0; l < stack.size(); ++l) {
        out.inputs.push_back(z);
        Matrix pre = matmul(op.data, matmul(z, stack[l]));
        const bool last = l + 1 == stack.size();
        if (last) {
            z = pre;
        } else {
            z = pre;
            for (auto& v : z.values()) v = activate(cfg.activation, v);
        }
        out.preacts.push_back(std::move(pre));
    }
    // z is now the N x 1 branch logit == act-free preacts.back()
}

}  // namespace detail

// Forward pass per the layer equations: compression Z = FC2(act(FC1(X))),
// per-branch stacked graph layers A_hat (Z W) with the hidden activation and
// an identity final layer, elementwise-mean fusion of the branch logits,
// sigmoid output. Every intermediate needed by backward() is cached.
// Operators for inactive branches are ignored and may be empty.
inline ForwardTrace forward(const FeatureMatrix& x, const RenormalizedAdjacency& a_f,
                            const RenormalizedAdjacency& a_t, const CleanerParams& params) {
    const CleanerConfig& cfg = params.config;
    const std::size_t n = x.n_snippets();
    if (x.dim() != cfg.raw_dim) {
        throw std::invalid_argument("forward: feature dim " + std::to_string(x.dim()) +
                                    " != config raw_dim " + std::to_string(cfg.raw_dim));
    }
    if (cfg.has_feature_branch() && a_f.size() != n)
        throw std::invalid_argument("forward: feature adjacency size mismatch");
    if (cfg.has_temporal_branch() && a_t.size() != n)
        throw std::invalid_argument("forward: temporal adjacency size mismatch");

    ForwardTrace t;
    t.n = n;
    t.features = x.matrix();
    t.op_feature = cfg.has_feature_branch() ? a_f : RenormalizedAdjacency{};
    t.op_temporal = cfg.has_temporal_branch() ? a_t : RenormalizedAdjacency{};

    t.comp_pre1 = matmul(t.features, params.comp_w1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cfg.comp_hidden; ++j) t.comp_pre1(i, j) += params.comp_b1[j];
    t.comp_hidden = t.comp_pre1;
    for (auto& v : t.comp_hidden.values()) v = detail::activate(cfg.activation, v);
    t.compressed = matmul(t.comp_hidden, params.comp_w2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cfg.comp_out; ++j) t.compressed(i, j) += params.comp_b2[j];

    if (cfg.has_feature_branch())
        detail::run_branch(t.compressed, t.op_feature, params.gcn_feature, cfg, t.feature);
    if (cfg.has_temporal_branch())
        detail::run_branch(t.compressed, t.op_temporal, params.gcn_temporal, cfg, t.temporal);

    const double inv_branches = 1.0 / double(cfg.branch_count());
    t.fused_logit.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double f = 0.0;
        if (cfg.has_feature_branch()) f += t.feature.preacts.back()(i, 0);
        if (cfg.has_temporal_branch()) f += t.temporal.preacts.back()(i, 0);
        t.fused_logit[i] = f * inv_branches;
    }
    t.prob.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        t.prob[i] = detail::clamp_prob(detail::sigmoid(t.fused_logit[i]));
    return t;
}

namespace detail {

// Backward through one branch. `logit_grad` is dL/d(branch logit), N x 1.
// Returns dL/d(compressed input) and fills the weight gradients.
inline Matrix branch_backward(const BranchTrace& trace, const RenormalizedAdjacency& op,
                              const std::vector<Matrix>& stack, const CleanerConfig& cfg,
                              const Matrix& logit_grad, std::vector<Matrix>& weight_grads) {
    Matrix grad_out = logit_grad;  // dL/d(layer output), starts at the logit
    for (std::size_t li = stack.size(); li-- > 0;) {
        const bool last = li + 1 == stack.size();
        Matrix delta = grad_out;  // dL/d(preact)
        if (!last) {
            for (std::size_t idx = 0; idx < delta.size(); ++idx) {
                delta.values()[idx] *= activate_grad(cfg.activation, trace.preacts[li].values()[idx]);
            }
        }
        // preact = A_hat (Z W): dL/d(ZW) = A_hat^T delta, then split.
        Matrix d_zw = matmul_atb(op.data, delta);
        weight_grads[li] = matmul_atb(trace.inputs[li], d_zw);
        grad_out = matmul_abt(d_zw, stack[li]);  // dL/dZ_l
    }
    return grad_out;
}

}  // namespace detail

// Chain rule through sigmoid, fusion, both graph branches, and the
// compression layers. `grad_prob` is dL/dp.
inline CleanerGradients backward(const ForwardTrace& trace, const CleanerParams& params,
                                 std::span<const double> grad_prob) {
    const CleanerConfig& cfg = params.config;
    const std::size_t n = trace.n;
    if (grad_prob.size() != n)
        throw std::invalid_argument("backward: grad size != trace snippet count");
    if (trace.features.cols() != cfg.raw_dim || trace.compressed.cols() != cfg.comp_out)
        throw std::invalid_argument("backward: trace does not match params shapes");
    if (!all_finite(grad_prob)) throw std::invalid_argument("backward: non-finite upstream grad");

    CleanerGradients g = detail::zero_like_tensors(cfg);

    // dL/d(fused logit) through the sigmoid.
    Matrix d_logit(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = trace.prob[i];
        d_logit(i, 0) = grad_prob[i] * p * (1.0 - p);
    }
    const double inv_branches = 1.0 / double(cfg.branch_count());
    Matrix d_branch(n, 1);
    for (std::size_t i = 0; i < n; ++i) d_branch(i, 0) = d_logit(i, 0) * inv_branches;

    Matrix d_compressed(n, cfg.comp_out);
    if (cfg.has_feature_branch()) {
        Matrix dz = detail::branch_backward(trace.feature, trace.op_feature, params.gcn_feature,
                                            cfg, d_branch, g.gcn_feature);
        for (std::size_t idx = 0; idx < dz.size(); ++idx) d_compressed.values()[idx] += dz.values()[idx];
    }
    if (cfg.has_temporal_branch()) {
        Matrix dz = detail::branch_backward(trace.temporal, trace.op_temporal, params.gcn_temporal,
                                            cfg, d_branch, g.gcn_temporal);
        for (std::size_t idx = 0; idx < dz.size(); ++idx) d_compressed.values()[idx] += dz.values()[idx];
    }

    // Compression: Z = act(X W1 + b1) W2 + b2.
    g.comp_w2 = matmul_atb(trace.comp_hidden, d_compressed);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cfg.comp_out; ++j) g.comp_b2[j] += d_compressed(i, j);
    Matrix d_hidden = matmul_abt(d_compressed, params.comp_w2);
    for (std::size_t idx = 0; idx < d_hidden.size(); ++idx) {
        d_hidden.values()[idx] *=
            detail::activate_grad(cfg.activation, trace.comp_pre1.values()[idx]);
    }
    g.comp_w1 = matmul_atb(trace.features, d_hidden);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cfg.comp_hidden; ++j) g.comp_b1[j] += d_hidden(i, j);
    return g;
}

// In-place optimizer step. Adam uses beta1=0.9, beta2=0.999, eps=1e-8 with
// bias correction; the sgd option is a plain scaled subtraction. Refuses
// non-finite gradients without touching the parameters.
inline void apply_update(CleanerParams& params, const CleanerGradients& grads, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("apply_update: lr must be > 0");
    auto theta = detail::tensor_views(params);
    const CleanerGradients& g = grads;
    auto gv = detail::tensor_views(g);
    if (theta.size() != gv.size())
        throw std::invalid_argument("apply_update: gradient tensor count mismatch");
    for (std::size_t t = 0; t < theta.size(); ++t) {
        if (theta[t].size() != gv[t].size())
            throw std::invalid_argument("apply_update: gradient shape mismatch");
        if (!all_finite(gv[t])) throw std::invalid_argument("apply_update: non-finite gradient");
    }

    params.step += 1;
    if (params.config.optimizer == OptimizerKind::sgd) {
        for (std::size_t t = 0; t < theta.size(); ++t)
            for (std::size_t i = 0; i < theta[t].size(); ++i) theta[t][i] -= lr * gv[t][i];
        return;
    }

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    auto m = detail::tensor_views(params.moment1);
    auto v = detail::tensor_views(params.moment2);
    const double bc1 = 1.0 - std::pow(beta1, double(params.step));
    const double bc2 = 1.0 - std::pow(beta2, double(params.step));
    for (std::size_t t = 0; t < theta.size(); ++t) {
        for (std::size_t i = 0; i < theta[t].size(); ++i) {
            const double grad = gv[t][i];
            m[t][i] = beta1 * m[t][i] + (1.0 - beta1) * grad;
            v[t][i] = beta2 * v[t][i] + (1.0 - beta2) * grad * grad;
            const double m_hat = m[t][i] / bc1;
            const double v_hat = v[t][i] / bc2;
            theta[t][i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

}  // namespace nck
