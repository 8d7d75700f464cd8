#include <cnc/fixtures.hpp>
#include <cnc/metrics.hpp>
#include <cnc/trainer.hpp>

#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"

namespace {

using cnc::Matrix;
using cnc::TrainConfig;

TrainConfig triangle_config() {
    TrainConfig c;
    c.batch = 6;
    c.knn = 2;
    c.max_steps = 500;
    return c;
}

TEST(TrainCnc, TwoTrianglesConvergesToOptimum) {
    const auto data = cnc::two_triangles();
    cnc::Rng rng(7);
    const auto res = cnc::train_cnc(data.features, triangle_config(), rng);
    EXPECT_NEAR(res.report.final_loss, 2.0 / 7.0, 0.02);
    EXPECT_LE(res.report.steps(), 500);
    const auto p = cnc::infer(res.model, data.features);
    EXPECT_EQ(p.labels[0], p.labels[1]);
    EXPECT_EQ(p.labels[1], p.labels[2]);
    EXPECT_EQ(p.labels[3], p.labels[4]);
    EXPECT_EQ(p.labels[4], p.labels[5]);
    EXPECT_NE(p.labels[0], p.labels[3]);
}

TEST(TrainCnc, SingleClusterLossIsZero) {
    const auto data = cnc::two_triangles();
    TrainConfig c = triangle_config();
    c.clusters = 1;
    c.max_steps = 50;
    cnc::Rng rng(1);
    const auto res = cnc::train_cnc(data.features, c, rng);
    ASSERT_FALSE(res.report.trace.empty());
    for (const auto& r : res.report.trace) EXPECT_EQ(r.loss, 0.0);
    EXPECT_EQ(cnc::infer(res.model, data.features).labels, cnc::Labels(6, 0));
}

TEST(TrainCnc, TraceInvariants) {
    cnc::Rng data_rng(2);
    const auto data = cnc::gaussian_blobs(120, 3, 2, 0.3, 3.0, data_rng);
    TrainConfig c;
    c.clusters = 3;
    c.batch = 40;
    c.epochs = 40;
    cnc::Rng rng(3);
    const auto res = cnc::train_cnc(data.features, c, rng);
    const auto& rep = res.report;
    EXPECT_EQ(rep.steps(), static_cast<long>(rep.trace.size()));
    EXPECT_GT(rep.steps(), 20);
    for (long s = 0; s < rep.steps(); ++s) {
        const auto& r = rep.trace[static_cast<std::size_t>(s)];
        EXPECT_EQ(r.step, s);
        EXPECT_TRUE(std::isfinite(r.loss));
        EXPECT_GE(r.loss, 0.0);
        EXPECT_LE(r.loss, 3.0);
        EXPECT_DOUBLE_EQ(r.temperature, c.gumbel.at_epoch(r.epoch));
    }
    EXPECT_LE(rep.smoothed(rep.steps(), 20), rep.smoothed(20, 20));
    EXPECT_EQ(rep.epoch_temperature.size(), static_cast<std::size_t>(rep.epochs_run) + (rep.stop_reason == "max_steps"));
    EXPECT_GT(rep.wall_seconds, 0.0);
}

TEST(TrainCnc, DeterministicGivenSeed) {
    cnc::Rng data_rng(4);
    const auto data = cnc::gaussian_blobs(90, 3, 2, 0.3, 3.0, data_rng);
    TrainConfig c;
    c.clusters = 3;
    c.batch = 30;
    c.epochs = 10;
    cnc::Rng r1(9), r2(9);
    const auto a = cnc::train_cnc(data.features, c, r1);
    const auto b = cnc::train_cnc(data.features, c, r2);
    EXPECT_EQ(a.report.trace, b.report.trace);
    EXPECT_TRUE(a.model == b.model);
}

TEST(EpochBatches, EachIndexAtMostOncePerEpoch) {
    cnc::Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const cnc::Index n = 1 + rng.index(200), m = 1 + rng.index(n);
        const auto batches = cnc::epoch_batches(n, m, rng);
        EXPECT_EQ(batches.size(), n / m);
        std::set<cnc::Index> seen;
        for (const auto& b : batches) {
            EXPECT_EQ(b.size(), m);
            for (cnc::Index i : b) {
                EXPECT_LT(i, n);
                EXPECT_TRUE(seen.insert(i).second);
            }
        }
    }
}

TEST(TrainCnc, ThreeBlobsNearBruteForceOptimum) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        cnc::Rng data_rng(100 + seed);
        const auto data = cnc::gaussian_blobs(9, 3, 2, 0.4, 3.0, data_rng);
        const auto graph = cnc::build_knn_graph(data.features, 2);
        const double opt = cnc::brute_force_min_ncuts(graph, 3).value;
        TrainConfig c;
        c.clusters = 3;
        c.batch = 9;
        c.knn = 2;
        c.max_steps = 600;
        cnc::Rng rng(seed);
        const auto res = cnc::train_cnc(data.features, c, rng);
        const auto p = cnc::infer(res.model, data.features);
        if (cnc::exact_ncuts(p, graph) <= 1.05 * opt + 1e-12) ++hits;
    }
    EXPECT_GE(hits, 8);
}

TEST(TrainCnc, Errors) {
    TrainConfig c = triangle_config();
    cnc::Rng rng(6);
    c.batch = 7;
    EXPECT_THROW(cnc::train_cnc(cnc::two_triangles().features, c, rng), cnc::ConfigError);
    c = triangle_config();
    c.knn = 6;
    EXPECT_THROW(cnc::train_cnc(cnc::two_triangles().features, c, rng), cnc::ConfigError);
    c = triangle_config();
    c.gumbel.min_temperature = 3;
    EXPECT_THROW(cnc::train_cnc(cnc::two_triangles().features, c, rng), cnc::ConfigError);
}

TEST(TrainCnc, AllVolumesZeroCarriesStep) {
    // A clamp larger than the whole graph volume leaves no usable cluster.
    const auto graph = cnc::two_triangles_graph();
    TrainConfig c;
    c.vol_eps = 100.0;
    cnc::Rng rng(7);
    try {
        cnc::train_cnc_on_graph(Matrix::Identity(6, 6), graph, c, rng);
        FAIL() << "expected AllVolumesZero";
    } catch (const cnc::AllVolumesZero& e) {
        EXPECT_EQ(e.step(), 0);
    }
}

TEST(Infer, IdenticalRowsShareLabels) {
    cnc::Rng rng(8);
    const auto m = cnc::make_mlp(3, {8}, 4, cnc::Activation::tanh, cnc::Activation::identity, rng);
    Matrix x(6, 3);
    x.row(0) << 0.3, -1, 2;
    for (int i = 1; i < 6; ++i) {
        if (i % 2) x.row(i) = x.row(0);
        else x.row(i).setConstant(0.1 * i);
    }
    const auto p = cnc::infer(m, x);
    EXPECT_EQ(p.labels[1], p.labels[0]);
    EXPECT_EQ(p.labels[3], p.labels[0]);
    EXPECT_EQ(p.labels[5], p.labels[0]);
    EXPECT_EQ(p.g, 4u);
}

TEST(Infer, TiesGoToLowestCluster) {
    cnc::Layer l{Matrix::Zero(2, 3), cnc::Vector::Zero(3), cnc::Activation::identity};
    EXPECT_EQ(cnc::infer(cnc::MlpModel({l}), Matrix::Ones(4, 2)).labels, cnc::Labels(4, 0));
}

TEST(Infer, HeldOutAccuracyTracksTrainAccuracy) {
    cnc::Rng data_rng(9);
    const auto data = cnc::gaussian_blobs(300, 3, 2, 0.5, 4.0, data_rng);
    cnc::Rng rng(10);
    const auto split = cnc::split_dataset(data.features, data.labels, 0.9, rng);
    TrainConfig c;
    c.clusters = 3;
    c.batch = 90;
    c.knn = 5;
    const auto res = cnc::train_cnc(split.train_x, c, rng);
    const double train_acc = cnc::clustering_accuracy(split.train_labels, cnc::infer(res.model, split.train_x));
    const double test_acc = cnc::clustering_accuracy(split.test_labels, cnc::infer(res.model, split.test_x));
    EXPECT_GT(train_acc, 0.9);
    EXPECT_NEAR(test_acc, train_acc, 0.05);
}

TEST(TrainSiamese, SeparatesBlobs) {
    cnc::Rng data_rng(11);
    const auto data = cnc::gaussian_blobs(100, 2, 2, 0.3, 3.0, data_rng);
    TrainConfig c;
    c.embed_dim = 4;
    c.siamese.epochs = 20;
    cnc::Rng rng(12);
    cnc::SiameseReport rep;
    const auto g = cnc::train_siamese(data.features, c, rng, &rep);
    EXPECT_EQ(rep.epoch_loss.size(), 20u);
    EXPECT_LT(rep.epoch_loss.back(), rep.epoch_loss.front());
    const Matrix v = cnc::predict(g, data.features);
    double within = 0, across = 0;
    long nw = 0, na = 0;
    for (Eigen::Index i = 0; i < v.rows(); ++i)
        for (Eigen::Index j = i + 1; j < v.rows(); ++j) {
            const double d = (v.row(i) - v.row(j)).norm();
            if (data.labels[static_cast<std::size_t>(i)] == data.labels[static_cast<std::size_t>(j)]) within += d, ++nw;
            else across += d, ++na;
        }
    EXPECT_LT(within / nw, across / na);
}

TEST(TrainSiamese, RepeatedPointLeavesLossUnchanged) {
    const Matrix x = Matrix::Constant(10, 3, 0.7);
    TrainConfig c;
    c.siamese.epochs = 5;
    cnc::Rng rng(13);
    cnc::SiameseReport rep;
    const auto g = cnc::train_siamese(x, c, rng, &rep);
    const Matrix v = cnc::predict(g, x);
    for (Eigen::Index i = 1; i < v.rows(); ++i) EXPECT_EQ(v.row(i), v.row(0));
    // Positives cost nothing; every negative sits at distance 0 and costs 1.
    const double expected = static_cast<double>(rep.negatives) / static_cast<double>(rep.positives + rep.negatives);
    for (double l : rep.epoch_loss) EXPECT_DOUBLE_EQ(l, expected);
}

TEST(TrainSiamese, DeterministicGivenSeed) {
    cnc::Rng data_rng(14);
    const auto data = cnc::two_moons(80, 0.05, data_rng);
    TrainConfig c;
    c.siamese.epochs = 3;
    cnc::Rng r1(15), r2(15);
    EXPECT_TRUE(cnc::train_siamese(data.features, c, r1) == cnc::train_siamese(data.features, c, r2));
}

TEST(TrainSiamese, DivergenceIsReported) {
    cnc::Rng data_rng(16);
    const auto data = cnc::gaussian_blobs(40, 2, 2, 0.3, 3.0, data_rng);
    TrainConfig c;
    c.siamese.adam.lr = 1e300;
    cnc::Rng rng(17);
    EXPECT_THROW(cnc::train_siamese(data.features * 1e150, c, rng), cnc::Error);
}

TEST(SplitDataset, Sizes) {
    const Matrix x = Matrix::Random(100, 2);
    cnc::Labels labels(100, 0);
    for (double f : {0.9, 0.7, 0.5, 0.2, 0.1}) {
        cnc::Rng rng(18);
        const auto s = cnc::split_dataset(x, labels, f, rng);
        EXPECT_EQ(s.train_index.size(), static_cast<std::size_t>(std::llround(100 * f)));
        EXPECT_EQ(s.train_index.size() + s.test_index.size(), 100u);
        EXPECT_EQ(s.train_labels.size(), s.train_index.size());
        std::set<cnc::Index> all(s.train_index.begin(), s.train_index.end());
        for (cnc::Index i : s.test_index) EXPECT_TRUE(all.insert(i).second);
        for (std::size_t r = 0; r < s.test_index.size(); ++r)
            EXPECT_EQ(s.test_x.row(static_cast<Eigen::Index>(r)), x.row(static_cast<Eigen::Index>(s.test_index[r])));
    }
}

TEST(SplitDataset, DeterministicAndErrors) {
    const Matrix x = Matrix::Random(50, 2);
    cnc::Rng a(19), b(19);
    EXPECT_EQ(cnc::split_dataset(x, {}, 0.7, a).train_index, cnc::split_dataset(x, {}, 0.7, b).train_index);
    cnc::Rng rng(20);
    EXPECT_THROW(cnc::split_dataset(x, {}, 1.0, rng), cnc::ConfigError);
    EXPECT_THROW(cnc::split_dataset(x, {}, 0.005, rng), cnc::EmptySplit);
    EXPECT_THROW(cnc::split_dataset(x, cnc::Labels(3, 0), 0.5, rng), cnc::LengthMismatch);
}

}  // namespace
