#ifndef CNC_AFFINITY_HPP
#define CNC_AFFINITY_HPP

#include "cnc/errors.hpp"
#include "cnc/parallel.hpp"
#include "cnc/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace cnc {

struct Edge {
    Index i;
    Index j;
    double w;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Sparse symmetric weighted graph. Every undirected edge is stored in both
/// directions, sorted by (i, j), so loss sums over `edges` equal reduce-sums
/// over the dense weight matrix.
struct AffinityGraph {
    Index n = 0;
    std::vector<Edge> edges;
    Vector degree;
    /// Bandwidth used for gaussian weights (0 for binary graphs).
    double sigma = 0.0;
    /// Set when a gaussian graph ended up with every weight equal to zero.
    bool zero_weight = false;

    double total_volume() const {
        double s = 0.0;
        for (Index i = 0; i < n; ++i) s += degree[static_cast<Eigen::Index>(i)];
        return s;
    }

    Matrix to_dense() const {
        Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (const auto& e : edges)
            w(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)) = e.w;
        return w;
    }
};

/// D_i = sum of the weights of edges leaving node i.
inline Vector degree_vector(const AffinityGraph& graph) {
    Vector d = Vector::Zero(static_cast<Eigen::Index>(graph.n));
    for (const auto& e : graph.edges) d[static_cast<Eigen::Index>(e.i)] += e.w;
    return d;
}

/// Throws DegenerateBatch describing the first violated invariant.
inline void validate(const AffinityGraph& graph) {
    if (static_cast<Index>(graph.degree.size()) != graph.n)
        throw DegenerateBatch("degree vector length does not match node count");
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        const auto& ed = graph.edges[e];
        if (ed.i >= graph.n || ed.j >= graph.n) throw DegenerateBatch("edge endpoint out of range");
        if (ed.i == ed.j) throw DegenerateBatch("self-loop on node " + std::to_string(ed.i));
        if (!(ed.w >= 0.0) || !std::isfinite(ed.w)) throw DegenerateBatch("negative or non-finite edge weight");
        if (e > 0) {
            const auto& prev = graph.edges[e - 1];
            if (std::tie(prev.i, prev.j) >= std::tie(ed.i, ed.j))
                throw DegenerateBatch("edges not sorted or duplicated");
        }
    }
    for (const auto& ed : graph.edges) {
        const Edge rev{ed.j, ed.i, ed.w};
        auto it = std::lower_bound(graph.edges.begin(), graph.edges.end(), rev, [](const Edge& a, const Edge& b) {
            return std::tie(a.i, a.j) < std::tie(b.i, b.j);
        });
        if (it == graph.edges.end() || it->i != rev.i || it->j != rev.j || it->w != ed.w)
            throw DegenerateBatch("graph is not symmetric");
    }
    const Vector d = degree_vector(graph);
    for (Index i = 0; i < graph.n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        if (d[ii] != graph.degree[ii]) throw DegenerateBatch("stored degree disagrees with edge weights");
    }
}

/// Builds a graph from undirected (i, j, w) triples. Repeated pairs keep the max weight.
inline AffinityGraph graph_from_edges(Index n, const std::vector<Edge>& undirected) {
    std::vector<Edge> directed;
    directed.reserve(undirected.size() * 2);
    for (const auto& e : undirected) {
        if (e.i >= n || e.j >= n) throw DegenerateBatch("edge endpoint out of range");
        if (e.i == e.j) throw DegenerateBatch("self-loops are not allowed");
        if (!(e.w >= 0.0) || !std::isfinite(e.w)) throw DegenerateBatch("edge weights must be finite and non-negative");
        directed.push_back({e.i, e.j, e.w});
        directed.push_back({e.j, e.i, e.w});
    }
    std::sort(directed.begin(), directed.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.i, a.j, a.w) < std::tie(b.i, b.j, b.w);
    });
    AffinityGraph g;
    g.n = n;
    for (const auto& e : directed) {
        if (!g.edges.empty() && g.edges.back().i == e.i && g.edges.back().j == e.j)
            g.edges.back().w = std::max(g.edges.back().w, e.w);
        else
            g.edges.push_back(e);
    }
    g.degree = degree_vector(g);
    return g;
}

/// Dense symmetric matrix to graph; zero entries are treated as missing edges.
inline AffinityGraph graph_from_dense(const Matrix& w) {
    if (w.rows() != w.cols()) throw DimensionMismatch("weight matrix must be square");
    const auto n = static_cast<Index>(w.rows());
    std::vector<Edge> und;
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) {
            const double a = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const double b = w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
            if (a != b) throw DegenerateBatch("weight matrix is not symmetric");
            if (a != 0.0) und.push_back({i, j, a});
        }
    return graph_from_edges(n, und);
}

struct WeightMode {
    enum class Kind { binary, gaussian };
    Kind kind = Kind::binary;
    /// Fixed bandwidth; empty means median of k-th neighbor distances.
    std::optional<double> sigma;

    static WeightMode binary() { return {}; }
    static WeightMode gaussian(double s) { return {Kind::gaussian, s}; }
    static WeightMode gaussian_auto() { return {Kind::gaussian, std::nullopt}; }
};

enum class Symmetrization {
    union_max,  ///< keep an edge if either endpoint lists the other
    mutual,     ///< keep an edge only if both endpoints list each other
};

struct EmbeddingBatch {
    Matrix vectors;
    std::vector<Index> source_indices;
};

namespace detail {

inline double squared_distance(const Matrix& x, Index a, Index b) {
    const auto ra = x.row(static_cast<Eigen::Index>(a));
    const auto rb = x.row(static_cast<Eigen::Index>(b));
    double s = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double d = ra[c] - rb[c];
        s += d * d;
    }
    return s;
}

}  // namespace detail

/// Neighbor lists with squared distances, nearest first.
struct NeighborLists {
    std::vector<std::vector<Index>> index;
    std::vector<std::vector<double>> sq_dist;
};

/// Exact k nearest neighbors under Euclidean distance, excluding the point
/// itself. Ties are broken by the smaller index.
inline NeighborLists nearest_neighbors(const Matrix& points, Index k) {
    const auto n = static_cast<Index>(points.rows());
    if (k == 0) throw ConfigError("k must be positive");
    if (n < 2 || k >= n)
        throw DegenerateBatch("need more than k=" + std::to_string(k) + " points, got " + std::to_string(n));
    if (!points.allFinite()) throw DegenerateBatch("embedding batch contains non-finite values");

    NeighborLists out;
    out.index.assign(n, {});
    out.sq_dist.assign(n, {});
    parallel_for(n, [&](std::size_t q) {
        std::vector<std::pair<double, Index>> cand;
        cand.reserve(n - 1);
        for (Index j = 0; j < n; ++j)
            if (j != q) cand.emplace_back(detail::squared_distance(points, q, j), j);
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
        auto& idx = out.index[q];
        auto& dst = out.sq_dist[q];
        idx.reserve(k);
        dst.reserve(k);
        for (Index t = 0; t < k; ++t) {
            dst.push_back(cand[t].first);
            idx.push_back(cand[t].second);
        }
    });
    return out;
}

/// k-NN affinity graph over one batch of embeddings.
inline AffinityGraph build_knn_graph(const Matrix& points, Index k, const WeightMode& mode = WeightMode::binary(),
                                     Symmetrization sym = Symmetrization::union_max) {
    const NeighborLists nn = nearest_neighbors(points, k);
    const auto n = static_cast<Index>(points.rows());

    double sigma = 0.0;
    if (mode.kind == WeightMode::Kind::gaussian) {
        if (mode.sigma) {
            sigma = *mode.sigma;
            if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("gaussian sigma must be positive");
        } else {
            std::vector<double> kth(n);
            for (Index i = 0; i < n; ++i) kth[i] = std::sqrt(nn.sq_dist[i].back());
            std::sort(kth.begin(), kth.end());
            sigma = (n % 2 == 1) ? kth[n / 2] : 0.5 * (kth[n / 2 - 1] + kth[n / 2]);
        }
    }
    auto weight = [&](double sq) {
        if (mode.kind == WeightMode::Kind::binary) return 1.0;
        if (sigma == 0.0) return sq == 0.0 ? 1.0 : 0.0;
        return std::exp(-sq / (2.0 * sigma * sigma));
    };

    std::vector<Edge> directed;
    directed.reserve(n * k);
    for (Index i = 0; i < n; ++i)
        for (Index t = 0; t < k; ++t) directed.push_back({i, nn.index[i][t], weight(nn.sq_dist[i][t])});

    std::vector<Edge> und;
    if (sym == Symmetrization::union_max) {
        und = std::move(directed);
    } else {
        std::sort(directed.begin(), directed.end(),
                  [](const Edge& a, const Edge& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
        for (const auto& e : directed) {
            if (e.i > e.j) continue;
            Edge rev{e.j, e.i, 0.0};
            auto it = std::lower_bound(directed.begin(), directed.end(), rev, [](const Edge& a, const Edge& b) {
                return std::tie(a.i, a.j) < std::tie(b.i, b.j);
            });
            if (it != directed.end() && it->i == e.j && it->j == e.i) und.push_back({e.i, e.j, std::max(e.w, it->w)});
        }
    }
    AffinityGraph g = graph_from_edges(n, und);
    g.sigma = sigma;
    if (mode.kind == WeightMode::Kind::gaussian) {
        g.zero_weight = std::all_of(g.edges.begin(), g.edges.end(), [](const Edge& e) { return e.w == 0.0; });
    }
    return g;
}

inline AffinityGraph build_knn_graph(const EmbeddingBatch& batch, Index k, const WeightMode& mode = WeightMode::binary(),
                                     Symmetrization sym = Symmetrization::union_max) {
    if (!batch.source_indices.empty() &&
        batch.source_indices.size() != static_cast<std::size_t>(batch.vectors.rows()))
        throw DimensionMismatch("source_indices length does not match batch rows");
    return build_knn_graph(batch.vectors, k, mode, sym);
}

}  // namespace cnc

#endif  // CNC_AFFINITY_HPP
