#ifndef CNC_LOSS_HPP
#define CNC_LOSS_HPP

// Expected normalized cuts over a soft cluster assignment Y (n x g):
//
//   cut_k  = sum_{(i,j) in E} w_ij * Y_ik * (1 - Y_jk)
//   Gamma  = Y^T D
//   loss   = sum_k cut_k / max(Gamma_k, eps)
//
// Edges are enumerated in both directions, which matches the reduce-sum over
// the dense n x n matrix. On one-hot Y this is exactly the Ncut of the
// corresponding hard partition.

#include "cnc/affinity.hpp"
#include "cnc/errors.hpp"
#include "cnc/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cnc {

inline constexpr double kDefaultVolumeEps = 1e-8;

/// Row-stochastic n x g matrix of cluster probabilities.
class SoftAssignment {
public:
    SoftAssignment() = default;
    explicit SoftAssignment(Matrix y) : y_(std::move(y)) { check(); }

    const Matrix& matrix() const noexcept { return y_; }
    Index rows() const noexcept { return static_cast<Index>(y_.rows()); }
    Index clusters() const noexcept { return static_cast<Index>(y_.cols()); }

    static SoftAssignment one_hot(const Labels& labels, Index g) {
        Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(g));
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0 || static_cast<Index>(labels[i]) >= g)
                throw DimensionMismatch("label out of range for one-hot encoding");
            y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
        }
        return SoftAssignment(std::move(y));
    }

    static SoftAssignment uniform(Index n, Index g) {
        return SoftAssignment(Matrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(g),
                                               1.0 / static_cast<double>(g)));
    }

private:
    void check() const {
        for (Eigen::Index i = 0; i < y_.rows(); ++i) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < y_.cols(); ++k) {
                const double v = y_(i, k);
                if (!(v >= 0.0 && v <= 1.0)) throw DimensionMismatch("soft assignment entry outside [0,1]");
                s += v;
            }
            if (std::abs(s - 1.0) > 1e-9) throw DimensionMismatch("soft assignment row does not sum to 1");
        }
    }

    Matrix y_;
};

namespace detail {

inline void check_dims(const Matrix& y, const AffinityGraph& graph) {
    if (static_cast<Index>(y.rows()) != graph.n)
        throw DimensionMismatch("assignment has " + std::to_string(y.rows()) + " rows, graph has " +
                                std::to_string(graph.n) + " nodes");
    if (y.cols() < 1) throw DimensionMismatch("assignment needs at least one cluster column");
}

/// Per-cluster expected cut: cut_k = sum_edges w_ij Y_ik (1 - Y_jk).
inline Vector cluster_cuts(const Matrix& y, const AffinityGraph& graph) {
    Vector cut = Vector::Zero(y.cols());
    for (const auto& e : graph.edges) {
        const auto i = static_cast<Eigen::Index>(e.i);
        const auto j = static_cast<Eigen::Index>(e.j);
        for (Eigen::Index k = 0; k < y.cols(); ++k) cut[k] += e.w * y(i, k) * (1.0 - y(j, k));
    }
    return cut;
}

}  // namespace detail

/// Total expected cut summed over all clusters.
inline double expected_cut(const Matrix& y, const AffinityGraph& graph) {
    detail::check_dims(y, graph);
    return detail::cluster_cuts(y, graph).sum();
}

/// Gamma = Y^T D.
inline Vector expected_vol(const Matrix& y, const Vector& degree) {
    if (y.rows() != degree.size()) throw DimensionMismatch("assignment rows and degree length differ");
    Vector gamma = Vector::Zero(y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index k = 0; k < y.cols(); ++k) gamma[k] += y(i, k) * degree[i];
    return gamma;
}

struct NcutsEvaluation {
    double loss = 0.0;
    Vector cuts;
    Vector volumes;
    Matrix grad;  ///< empty unless requested
};

/// Loss and (optionally) dLoss/dY. Y need not be row-stochastic here so that
/// finite differences can perturb single entries.
inline NcutsEvaluation evaluate_expected_ncuts(const Matrix& y, const AffinityGraph& graph,
                                               double eps = kDefaultVolumeEps, bool with_grad = false) {
    detail::check_dims(y, graph);
    if (!(eps > 0.0)) throw ConfigError("volume clamp eps must be positive");

    NcutsEvaluation out;
    const Eigen::Index g = y.cols();
    out.volumes = expected_vol(y, graph.degree);
    out.cuts = detail::cluster_cuts(y, graph);
    if (with_grad) out.grad = Matrix::Zero(y.rows(), g);

    // An edgeless (or all-zero) graph has nothing to cut.
    if (graph.total_volume() == 0.0) return out;

    bool any_volume = false;
    for (Eigen::Index k = 0; k < g; ++k) any_volume = any_volume || out.volumes[k] >= eps;
    if (!any_volume) throw AllVolumesZero("every expected cluster volume is below eps");

    Vector inv = Vector::Zero(g);
    for (Eigen::Index k = 0; k < g; ++k) {
        inv[k] = 1.0 / std::max(out.volumes[k], eps);
        out.loss += out.cuts[k] * inv[k];
    }
    if (!with_grad) return out;

    // Numerator: d/dY_ik of w_ij Y_ik (1-Y_jk) and d/dY_jk of the same term.
    for (const auto& e : graph.edges) {
        const auto i = static_cast<Eigen::Index>(e.i);
        const auto j = static_cast<Eigen::Index>(e.j);
        for (Eigen::Index k = 0; k < g; ++k) {
            out.grad(i, k) += e.w * (1.0 - y(j, k)) * inv[k];
            out.grad(j, k) -= e.w * y(i, k) * inv[k];
        }
    }
    // Denominator: Gamma_k depends on every Y_ik through D_i, unless clamped.
    for (Eigen::Index k = 0; k < g; ++k) {
        if (out.volumes[k] < eps) continue;
        const double c = out.cuts[k] * inv[k] * inv[k];
        for (Eigen::Index i = 0; i < y.rows(); ++i) out.grad(i, k) -= c * graph.degree[i];
    }
    return out;
}

inline double expected_ncuts(const Matrix& y, const AffinityGraph& graph, double eps = kDefaultVolumeEps) {
    return evaluate_expected_ncuts(y, graph, eps, false).loss;
}

inline Matrix expected_ncuts_grad(const Matrix& y, const AffinityGraph& graph, double eps = kDefaultVolumeEps) {
    return evaluate_expected_ncuts(y, graph, eps, true).grad;
}

inline double expected_cut(const SoftAssignment& y, const AffinityGraph& graph) {
    return expected_cut(y.matrix(), graph);
}
inline Vector expected_vol(const SoftAssignment& y, const Vector& degree) { return expected_vol(y.matrix(), degree); }
inline double expected_ncuts(const SoftAssignment& y, const AffinityGraph& graph, double eps = kDefaultVolumeEps) {
    return expected_ncuts(y.matrix(), graph, eps);
}
inline Matrix expected_ncuts_grad(const SoftAssignment& y, const AffinityGraph& graph,
                                  double eps = kDefaultVolumeEps) {
    return expected_ncuts_grad(y.matrix(), graph, eps);
}

}  // namespace cnc

#endif  // CNC_LOSS_HPP
