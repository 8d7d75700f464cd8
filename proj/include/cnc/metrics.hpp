#ifndef CNC_METRICS_HPP
#define CNC_METRICS_HPP

#include "cnc/affinity.hpp"
#include "cnc/errors.hpp"
#include "cnc/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace cnc {

/// Hard cluster labels in [0, g). Empty clusters are allowed.
struct Partition {
    Labels labels;
    Index g = 0;

    Index size() const noexcept { return labels.size(); }

    void validate() const {
        for (int l : labels)
            if (l < 0 || static_cast<Index>(l) >= g)
                throw DimensionMismatch("label " + std::to_string(l) + " outside [0," + std::to_string(g) + ")");
    }
};

struct EvalResult {
    double acc = 0.0;
    double nmi = 0.0;
    double ncut = 0.0;
};

/// Ncuts = sum_k cut(S_k, ~S_k) / vol(S_k, V) of a hard partition.
inline double exact_ncuts(const Partition& p, const AffinityGraph& graph) {
    if (p.size() != graph.n) throw DimensionMismatch("partition does not cover the graph nodes");
    p.validate();
    std::vector<double> cut(p.g, 0.0);
    std::vector<double> vol(p.g, 0.0);
    for (Index i = 0; i < graph.n; ++i) vol[static_cast<Index>(p.labels[i])] += graph.degree[static_cast<Eigen::Index>(i)];
    for (const auto& e : graph.edges)
        if (p.labels[e.i] != p.labels[e.j]) cut[static_cast<Index>(p.labels[e.i])] += e.w;
    double total = 0.0;
    for (Index k = 0; k < p.g; ++k) {
        if (vol[k] == 0.0) {
            if (cut[k] != 0.0) throw DegenerateCluster("cluster " + std::to_string(k) + " has cut but no volume");
            continue;
        }
        total += cut[k] / vol[k];
    }
    return total;
}

struct OracleResult {
    Partition partition;
    double value = 0.0;
};

inline bool brute_force_feasible(Index n, Index g) {
    if (g <= 1) return true;
    if (g == 2) return n <= 14;
    if (g == 3) return n <= 10;
    // Larger g: same budget as g=3, n=10.
    double count = std::pow(static_cast<double>(g), static_cast<double>(n));
    return count <= std::pow(3.0, 10.0);
}

/// Global minimizer of Ncuts over partitions into exactly g non-empty
/// clusters. Labelings are enumerated in canonical (first-occurrence) form,
/// so each set partition is visited once; ties go to the lexicographically
/// smallest canonical labeling.
inline OracleResult brute_force_min_ncuts(const AffinityGraph& graph, Index g) {
    const Index n = graph.n;
    if (g == 0) throw ConfigError("cluster count must be positive");
    if (g > n) throw ConfigError("cannot split " + std::to_string(n) + " nodes into " + std::to_string(g) + " clusters");
    if (!brute_force_feasible(n, g))
        throw InstanceTooLarge("exhaustive search over n=" + std::to_string(n) + ", g=" + std::to_string(g) +
                               " exceeds the enumeration limit");

    OracleResult best;
    best.value = std::numeric_limits<double>::infinity();
    best.partition.g = g;

    Partition cur;
    cur.g = g;
    cur.labels.assign(n, 0);
    // Restricted growth strings: labels[i] <= 1 + max(labels[0..i)).
    std::vector<int> prefix_max(n, 0);
    auto visit = [&] {
        if (static_cast<Index>(prefix_max[n - 1] + 1) != g) return;
        const double v = exact_ncuts(cur, graph);
        if (v < best.value) {
            best.value = v;
            best.partition = cur;
        }
    };
    if (n == 0) return best;
    // Iterative enumeration in lexicographic order.
    for (;;) {
        visit();
        Index i = n - 1;
        for (;;) {
            if (i == 0) return best;
            const int limit = std::min<int>(prefix_max[i - 1] + 1, static_cast<int>(g) - 1);
            if (cur.labels[i] < limit) {
                ++cur.labels[i];
                prefix_max[i] = std::max(prefix_max[i - 1], cur.labels[i]);
                for (Index t = i + 1; t < n; ++t) {
                    cur.labels[t] = 0;
                    prefix_max[t] = prefix_max[t - 1];
                }
                break;
            }
            --i;
        }
    }
}

/// Minimum-cost assignment (Kuhn-Munkres, potentials form) on a square cost
/// matrix. Returns row_to_col.
inline std::vector<Index> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
    const Index n = cost.size();
    if (n == 0) return {};
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is a sentinel.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<Index> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (Index i = 1; i <= n; ++i) {
        p[0] = i;
        Index j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const Index i0 = p[j0];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const Index j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Index> row_to_col(n);
    for (Index j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

namespace detail {

/// Maps arbitrary integer labels to 0..k-1 in order of increasing value.
inline std::vector<Index> densify(const Labels& labels, Index& count) {
    std::map<int, Index> ids;
    for (int l : labels) ids.emplace(l, 0);
    Index next = 0;
    for (auto& [_, id] : ids) id = next++;
    count = next;
    std::vector<Index> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = ids.at(labels[i]);
    return out;
}

}  // namespace detail

/// Contingency table: rows are predicted clusters, columns true classes.
inline std::vector<std::vector<double>> contingency(const Labels& truth, const Labels& predicted, Index& n_true,
                                                   Index& n_pred) {
    if (truth.size() != predicted.size())
        throw LengthMismatch("true labels (" + std::to_string(truth.size()) + ") and predictions (" +
                             std::to_string(predicted.size()) + ") differ in length");
    const auto t = detail::densify(truth, n_true);
    const auto p = detail::densify(predicted, n_pred);
    std::vector<std::vector<double>> c(n_pred, std::vector<double>(n_true, 0.0));
    for (std::size_t i = 0; i < t.size(); ++i) c[p[i]][t[i]] += 1.0;
    return c;
}

/// Best-matching accuracy. Unequal numbers of classes and clusters are handled
/// by zero-padding the contingency table to a square.
inline double clustering_accuracy(const Labels& truth, const Labels& predicted) {
    Index nt = 0, np = 0;
    const auto c = contingency(truth, predicted, nt, np);
    if (truth.empty()) return 0.0;
    const Index s = std::max(nt, np);
    std::vector<std::vector<double>> cost(s, std::vector<double>(s, 0.0));
    for (Index a = 0; a < np; ++a)
        for (Index b = 0; b < nt; ++b) cost[a][b] = -c[a][b];
    const auto match = hungarian_min_cost(cost);
    double hits = 0.0;
    for (Index a = 0; a < np; ++a)
        if (match[a] < nt) hits += c[a][match[a]];
    return hits / static_cast<double>(truth.size());
}

inline double clustering_accuracy(const Labels& truth, const Partition& predicted) {
    return clustering_accuracy(truth, predicted.labels);
}

/// I(l; c) / max(H(l), H(c)), natural log. Both entropies zero means both
/// labelings are a single cluster, which counts as identical (1).
inline double nmi(const Labels& truth, const Labels& predicted) {
    Index nt = 0, np = 0;
    const auto c = contingency(truth, predicted, nt, np);
    if (truth.empty()) return 0.0;
    const double n = static_cast<double>(truth.size());
    std::vector<double> pt(nt, 0.0), pp(np, 0.0);
    for (Index a = 0; a < np; ++a)
        for (Index b = 0; b < nt; ++b) {
            pp[a] += c[a][b] / n;
            pt[b] += c[a][b] / n;
        }
    auto entropy = [](const std::vector<double>& p) {
        double h = 0.0;
        for (double x : p)
            if (x > 0.0) h -= x * std::log(x);
        return h;
    };
    const double ht = entropy(pt);
    const double hp = entropy(pp);
    const double denom = std::max(ht, hp);
    if (denom == 0.0) return 1.0;
    double mi = 0.0;
    for (Index a = 0; a < np; ++a)
        for (Index b = 0; b < nt; ++b) {
            const double pab = c[a][b] / n;
            if (pab > 0.0) mi += pab * std::log(pab / (pp[a] * pt[b]));
        }
    return std::clamp(mi / denom, 0.0, 1.0);
}

inline double nmi(const Labels& truth, const Partition& predicted) { return nmi(truth, predicted.labels); }

}  // namespace cnc

#endif  // CNC_METRICS_HPP
