#ifndef CNC_FIXTURES_HPP
#define CNC_FIXTURES_HPP

// Small synthetic datasets with known structure.

#include "cnc/affinity.hpp"
#include "cnc/rng.hpp"
#include "cnc/types.hpp"

#include <cmath>
#include <numbers>

namespace cnc {

struct Dataset {
    Matrix features;
    Labels labels;  ///< empty when unlabeled
};

/// Six points in R^2 forming two triangles. With k = 2 and binary weights the
/// k-NN graph is two 3-cliques joined by one bridge edge (2-3), so each
/// triangle has volume 2 + 2 + 3 = 7 and the triangle split has Ncut 2/7.
inline Dataset two_triangles() {
    Dataset d;
    d.features.resize(6, 2);
    d.features << -0.9, 0.3,  //
        -1.2, -0.7,           //
        0.0, 0.0,             //
        1.0, 0.0,             //
        1.9, -0.3,            //
        2.2, 0.7;
    d.labels = {0, 0, 0, 1, 1, 1};
    return d;
}

/// The two-triangle graph built directly from its edge list.
inline AffinityGraph two_triangles_graph() {
    return graph_from_edges(6, {{0, 1, 1.0}, {0, 2, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 4, 1.0}, {3, 5, 1.0}, {4, 5, 1.0}});
}

/// `g` isotropic Gaussian blobs with centers evenly spaced on a circle of
/// radius `radius` (first two coordinates). Points are assigned round-robin.
inline Dataset gaussian_blobs(Index n, Index g, Index dim, double stddev, double radius, Rng& rng) {
    Dataset d;
    d.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    d.labels.resize(n);
    for (Index i = 0; i < n; ++i) {
        const Index c = i % g;
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(g);
        for (Index j = 0; j < dim; ++j) {
            double center = 0.0;
            if (j == 0) center = radius * std::cos(angle);
            if (j == 1) center = radius * std::sin(angle);
            d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = center + stddev * rng.normal();
        }
        d.labels[i] = static_cast<int>(c);
    }
    return d;
}

/// Two interleaving half circles in R^2 with Gaussian noise.
inline Dataset two_moons(Index n, double noise, Rng& rng) {
    Dataset d;
    d.features.resize(static_cast<Eigen::Index>(n), 2);
    d.labels.resize(n);
    for (Index i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % 2);
        const double t = std::numbers::pi * rng.uniform();
        double x = std::cos(t), y = std::sin(t);
        if (c == 1) {
            x = 1.0 - x;
            y = 0.5 - y;
        }
        const auto r = static_cast<Eigen::Index>(i);
        d.features(r, 0) = x + noise * rng.normal();
        d.features(r, 1) = y + noise * rng.normal();
        d.labels[i] = c;
    }
    return d;
}

}  // namespace cnc

#endif  // CNC_FIXTURES_HPP
