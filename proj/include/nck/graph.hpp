// Snippet graphs: feature-similarity and temporal-consistency adjacency
// construction plus the renormalized graph-Laplacian approximation applied
// by every graph layer.
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "nck/matrix.hpp"

namespace nck {

// Counts every adjacency/operator construction in the process. Tests use it
// to confirm that test-time inference never touches the graph machinery.
inline std::atomic<std::uint64_t>& graph_build_counter() {
    static std::atomic<std::uint64_t> count{0};
    return count;
}

// N x d snippet feature matrix; row i holds the d-dimensional feature of
// snippet i. Rejects empty or non-finite inputs on construction.
class FeatureMatrix {
public:
    explicit FeatureMatrix(Matrix data) : data_(std::move(data)) {
        if (data_.rows() < 1 || data_.cols() < 1) {
            throw std::invalid_argument("FeatureMatrix: need at least 1 snippet and 1 dimension");
        }
        if (!all_finite(data_)) {
            throw std::invalid_argument("FeatureMatrix: non-finite feature entries");
        }
    }

    std::size_t n_snippets() const { return data_.rows(); }
    std::size_t dim() const { return data_.cols(); }
    const Matrix& matrix() const { return data_; }
    double operator()(std::size_t i, std::size_t j) const { return data_(i, j); }

private:
    Matrix data_;
};

enum class AdjacencyKind { feature_similarity, temporal_consistency, constant };

struct Adjacency {
    Matrix data;
    AdjacencyKind kind = AdjacencyKind::constant;

    std::size_t size() const { return data.rows(); }
};

// The operator applied in every graph layer: A_hat = D^(-1/2) (A+I) D^(-1/2)
// with D the diagonal of row sums of A+I.
struct RenormalizedAdjacency {
    Matrix data;

    std::size_t size() const { return data.rows(); }
    bool empty() const { return data.empty(); }
};

// A(i,j) = exp(Xi . Xj - max_k(Xi . Xk)). The max runs over dot products of
// row i with every row of X (itself included), so each row of the result
// attains exactly 1 at its argmax column and all entries lie in (0,1].
// The output is generally not symmetric; callers that want a symmetric
// operator use symmetrize() before renormalize().
inline Adjacency build_feature_similarity(const FeatureMatrix& x) {
    graph_build_counter().fetch_add(1, std::memory_order_relaxed);
    const std::size_t n = x.n_snippets();
    Matrix dots = matmul_abt(x.matrix(), x.matrix());
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double row_max = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            row_max = std::max(row_max, dots(i, j));
        }
        for (std::size_t j = 0; j < n; ++j) {
            a(i, j) = std::exp(dots(i, j) - row_max);
        }
    }
    return {std::move(a), AdjacencyKind::feature_similarity};
}

// A(i,j) = exp(-|i-j|), the Laplacian kernel over snippet indices.
// Symmetric Toeplitz with unit diagonal and entries in (0,1].
inline Adjacency build_temporal_consistency(std::size_t n) {
    if (n < 1) {
        throw std::invalid_argument("build_temporal_consistency: n must be >= 1");
    }
    graph_build_counter().fetch_add(1, std::memory_order_relaxed);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double dist = i >= j ? double(i - j) : double(j - i);
            a(i, j) = std::exp(-dist);
        }
    }
    return {std::move(a), AdjacencyKind::temporal_consistency};
}

// Ablation adjacency: every entry set to the same value (the mid-value 0.5
// of the kernel bounds in the reference experiments).
inline Adjacency build_constant(std::size_t n, double value) {
    if (n < 1) {
        throw std::invalid_argument("build_constant: n must be >= 1");
    }
    if (!(value > 0.0) || value > 1.0) {
        throw std::invalid_argument("build_constant: value " + std::to_string(value) +
                                    " outside (0,1]");
    }
    graph_build_counter().fetch_add(1, std::memory_order_relaxed);
    return {Matrix::filled(n, n, value), AdjacencyKind::constant};
}

// (A + A^T)/2. Optional preprocessing for the feature-similarity graph,
// which is asymmetric by construction; off by default everywhere.
inline Adjacency symmetrize(const Adjacency& a) {
    graph_build_counter().fetch_add(1, std::memory_order_relaxed);
    const std::size_t n = a.size();
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            s(i, j) = 0.5 * (a.data(i, j) + a.data(j, i));
        }
    }
    return {std::move(s), a.kind};
}

// A_hat = D^(-1/2) (A+I) D^(-1/2), D_ii = sum_j (A+I)_ij. Row sums are used
// as-is; an asymmetric input yields an asymmetric operator.
inline RenormalizedAdjacency renormalize(const Adjacency& a) {
    const std::size_t n = a.data.rows();
    if (n == 0 || a.data.cols() != n) {
        throw std::invalid_argument("renormalize: adjacency must be square and non-empty");
    }
    for (double v : a.data.values()) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("renormalize: non-finite adjacency entry");
        }
        if (v < 0.0) {
            throw std::invalid_argument("renormalize: negative adjacency entry");
        }
    }
    graph_build_counter().fetch_add(1, std::memory_order_relaxed);
    // Self loops first, then scale by inverse square roots of the row sums.
    // D_ii >= 1 always because of the +I term.
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 1.0;  // self loop
        for (std::size_t j = 0; j < n; ++j) row_sum += a.data(i, j);
        inv_sqrt[i] = 1.0 / std::sqrt(row_sum);
    }
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double with_loop = a.data(i, j) + (i == j ? 1.0 : 0.0);
            out(i, j) = inv_sqrt[i] * with_loop * inv_sqrt[j];
        }
    }
    return {std::move(out)};
}

}  // namespace nck
