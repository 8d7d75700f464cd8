// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <cnc/cnc.hpp>
#include <cnc_cli.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
using cnc::Matrix;
using cnc::TrainConfig;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool run_criterion(int id, const char* name, double budget_seconds, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = budget_seconds <= 0 || secs < budget_seconds;
    const bool pass = o.pass && in_time;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail
              << fmt(" (%.2fs", secs) << (budget_seconds > 0 ? fmt(", limit %.0fs)", budget_seconds) : std::string(")"))
              << (in_time ? "" : " TIME LIMIT EXCEEDED") << std::endl;
    return pass;
}

cnc::AffinityGraph random_graph(cnc::Index n, cnc::Rng& rng) {
    return cnc::graph_from_dense(cnc::oracle::random_weights(n, 0.4, rng));
}

// ---------------------------------------------------------------------------

Outcome two_triangles() {
    const auto data = cnc::two_triangles();
    TrainConfig c;
    c.batch = 6;
    c.knn = 2;
    c.max_steps = 500;
    cnc::Rng rng(7);
    const auto res = cnc::train_cnc(data.features, c, rng);
    const auto p = cnc::infer(res.model, data.features);
    const bool split = p.labels[0] == p.labels[1] && p.labels[1] == p.labels[2] && p.labels[3] == p.labels[4] &&
                       p.labels[4] == p.labels[5] && p.labels[0] != p.labels[3];
    const double loss = res.report.final_loss;
    const bool ok = std::abs(loss - 0.286) <= 0.02 && res.report.steps() <= 500 && split;
    return {ok, fmt("final loss %.4f (target 0.286 +/- 0.02) after %ld steps, triangles %s", loss, res.report.steps(),
                    split ? "split" : "NOT split")};
}

Outcome one_hot_equivalence() {
    cnc::Rng rng(2024);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const cnc::Index n = 3 + rng.index(10);  // 3..12
        const cnc::Index g = 2 + rng.index(2);
        const auto graph = random_graph(n, rng);
        const auto labels = cnc::oracle::random_surjective_labels(n, g, rng);
        const double e = cnc::expected_ncuts(cnc::SoftAssignment::one_hot(labels, g), graph);
        worst = std::max(worst, std::abs(e - cnc::exact_ncuts({labels, g}, graph)));
    }
    return {worst < 1e-10, fmt("max |expected - exact| = %.3g over 100 instances (tol 1e-10)", worst)};
}

Outcome gradient_check() {
    cnc::Rng rng(31);
    double worst_loss = 0.0, worst_e2e = 0.0;
    int instances = 0;
    while (instances < 50) {
        const cnc::Index n = 6 + rng.index(7), g = 2 + rng.index(3);
        const auto graph = random_graph(n, rng);
        const Matrix y = cnc::oracle::random_stochastic(n, g, rng, 0.05);
        const auto ev = cnc::evaluate_expected_ncuts(y, graph, cnc::kDefaultVolumeEps, true);
        if ((ev.volumes.array() <= 10 * cnc::kDefaultVolumeEps).any()) continue;
        const Matrix fd = cnc::oracle::finite_difference([&](const Matrix& p) { return cnc::expected_ncuts(p, graph); },
                                                         y, 1e-5);
        worst_loss = std::max(worst_loss, cnc::oracle::max_relative_error(ev.grad, fd));
        ++instances;
    }
    // End to end: ncuts(softmax(F(x))) with respect to every parameter of F.
    for (int t = 0; t < 10; ++t) {
        const cnc::Index n = 6 + rng.index(7), g = 2 + rng.index(3), in = 2 + rng.index(4);
        const auto graph = random_graph(n, rng);
        Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
        cnc::MlpModel m = cnc::make_mlp(in, {8, 8}, g, cnc::Activation::tanh, cnc::Activation::identity, rng);
        const double tau = 1.0;
        auto loss = [&] { return cnc::expected_ncuts(cnc::gumbel_softmax(cnc::predict(m, x), tau), graph); };
        const auto fw = cnc::forward(m, x);
        const Matrix yy = cnc::gumbel_softmax(fw.output, tau);
        const auto grads =
            cnc::backward(m, fw.cache, cnc::gumbel_softmax_backward(yy, cnc::expected_ncuts_grad(yy, graph), tau));
        for (std::size_t l = 0; l < m.layers().size(); ++l) {
            auto& layer = m.layers()[l];
            Matrix analytic(1, layer.weight.size() + layer.bias.size()), fd(analytic.rows(), analytic.cols());
            for (Eigen::Index i = 0; i < analytic.cols(); ++i) {
                double* p = i < layer.weight.size() ? layer.weight.data() + i : layer.bias.data() + (i - layer.weight.size());
                analytic(0, i) = i < layer.weight.size() ? grads.weight[l].data()[i] : grads.bias[l][i - layer.weight.size()];
                const double keep = *p;
                *p = keep + 1e-5;
                const double up = loss();
                *p = keep - 1e-5;
                const double down = loss();
                *p = keep;
                fd(0, i) = (up - down) / 2e-5;
            }
            worst_e2e = std::max(worst_e2e, cnc::oracle::max_relative_error(analytic, fd));
        }
    }
    return {worst_loss < 1e-5 && worst_e2e < 1e-4,
            fmt("loss gradient max rel err %.3g (tol 1e-5, 50 instances); end-to-end through F %.3g (tol 1e-4)",
                worst_loss, worst_e2e)};
}

Outcome uniform_identity() {
    cnc::Rng rng(4);
    double worst = 0.0;
    int graphs = 0;
    auto check = [&](const cnc::AffinityGraph& graph) {
        if (graph.total_volume() == 0.0) return;
        ++graphs;
        for (cnc::Index g : {2u, 3u, 5u})
            worst = std::max(worst, std::abs(cnc::expected_ncuts(cnc::SoftAssignment::uniform(graph.n, g), graph) -
                                             static_cast<double>(g - 1)));
    };
    check(cnc::two_triangles_graph());
    for (int t = 0; t < 100; ++t) check(random_graph(2 + rng.index(40), rng));
    for (int t = 0; t < 20; ++t) {
        Matrix x(50, 3);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
        check(cnc::build_knn_graph(x, 1 + rng.index(6), t % 2 ? cnc::WeightMode::gaussian_auto() : cnc::WeightMode::binary()));
    }
    return {worst < 1e-9, fmt("max |L(uniform) - (g-1)| = %.3g over %d graphs x g in {2,3,5} (tol 1e-9)", worst, graphs)};
}

Outcome oracle_proximity() {
    int hits = 0;
    std::string values;
    for (std::uint64_t inst = 0; inst < 10; ++inst) {
        cnc::Rng grng(500 + inst);
        const auto graph = random_graph(10, grng);
        const double opt = cnc::brute_force_min_ncuts(graph, 2).value;
        const Matrix ids = Matrix::Identity(10, 10);
        TrainConfig c;
        c.clusters = 2;
        c.max_steps = 2000;
        c.epochs = 2000;
        c.patience = 0;
        c.gumbel.decay = 0.995;
        double best = std::numeric_limits<double>::infinity();
        for (std::uint64_t restart = 0; restart < 3; ++restart) {
            cnc::Rng rng(inst * 10 + restart);
            const auto res = cnc::train_cnc_on_graph(ids, graph, c, rng);
            const auto p = cnc::infer(res.model, ids);
            if (std::count(p.labels.begin(), p.labels.end(), 0) % 10 == 0) continue;  // one cluster is empty
            best = std::min(best, cnc::exact_ncuts(p, graph));
        }
        const bool hit = best <= 1.05 * opt;
        hits += hit;
        values += fmt(" %.3f/%.3f", best, opt);
    }
    return {hits >= 8, fmt("%d/10 instances within 5%% of the optimum (need 8); cnc/opt:%s", hits, values.c_str())};
}

TrainConfig blobs_config() {
    TrainConfig c;
    c.clusters = 3;
    c.batch = 256;
    c.knn = 5;
    return c;
}

cnc::Dataset blobs_fixture() {
    cnc::Rng rng(600);
    return cnc::gaussian_blobs(600, 3, 2, 0.5, 4.0, rng);
}

cnc::Dataset moons_fixture() {
    cnc::Rng rng(1000);
    return cnc::two_moons(1000, 0.05, rng);
}

Outcome synthetic_clustering() {
    const auto blobs = blobs_fixture();
    cnc::Rng rng(1);
    const auto res = cnc::train_cnc(blobs.features, blobs_config(), rng);
    const double blob_acc = cnc::clustering_accuracy(blobs.labels, cnc::infer(res.model, blobs.features));
    const double blob_ref =
        cnc::clustering_accuracy(blobs.labels, cnc::oracle::spectral_clustering(blobs.features, 3, 5, 1));

    const auto moons = moons_fixture();
    TrainConfig mc;
    mc.clusters = 2;
    mc.batch = 256;
    mc.knn = 5;
    mc.embed_dim = 4;
    mc.siamese.knn = 5;
    mc.siamese.epochs = 30;
    cnc::Rng srng(2), crng(3);
    const auto embedder = cnc::train_siamese(moons.features, mc, srng);
    const Matrix emb = cnc::predict(embedder, moons.features);
    const auto mres = cnc::train_cnc(emb, mc, crng);
    const auto moon_pred = cnc::infer(mres.model, emb);
    const double moon_acc = cnc::clustering_accuracy(moons.labels, moon_pred);
    const auto emb_graph = cnc::build_knn_graph(emb, mc.knn);
    const double pred_ncut = cnc::exact_ncuts(moon_pred, emb_graph);
    const double true_ncut = cnc::exact_ncuts(cnc::Partition{moons.labels, 2}, emb_graph);
    const double moon_ref =
        cnc::clustering_accuracy(moons.labels, cnc::oracle::spectral_clustering(moons.features, 2, 10, 1));
    const bool ok = blob_acc >= 0.98 && moon_acc >= 0.95 && blob_ref >= 0.98 && moon_ref >= 0.95;
    return {ok, fmt("blobs ACC %.4f (need 0.98, spectral ref %.4f); moons+siamese ACC %.4f (need 0.95, spectral ref "
                    "%.4f; Ncut of prediction %.4f vs true partition %.4f on the embedding graph)",
                    blob_acc, blob_ref, moon_acc, moon_ref, pred_ncut, true_ncut)};
}

Outcome generalization() {
    const auto blobs = blobs_fixture();
    auto run = [&](double fraction, std::uint64_t seed, double& train_acc) {
        cnc::Rng rng(seed);
        const auto split = cnc::split_dataset(blobs.features, blobs.labels, fraction, rng);
        TrainConfig c = blobs_config();
        c.batch = std::min<cnc::Index>(c.batch, split.train_x.rows());
        const auto res = cnc::train_cnc(split.train_x, c, rng);
        train_acc = cnc::clustering_accuracy(split.train_labels, cnc::infer(res.model, split.train_x));
        return cnc::clustering_accuracy(split.test_labels, cnc::infer(res.model, split.test_x));
    };
    double train90 = 0, train10 = 0;
    const double test90 = run(0.9, 90, train90);
    const double test10 = run(0.1, 10, train10);
    const bool ok = std::abs(test90 - train90) <= 0.05 && test90 - test10 < 0.15;
    return {ok, fmt("90/10 split: train %.4f test %.4f (gap <= 0.05); 10%% training: test %.4f (drop %.4f < 0.15)",
                    train90, test90, test10, test90 - test10)};
}

Outcome metric_correctness() {
    cnc::Rng rng(8);
    int acc_mismatch = 0, perm_fail = 0;
    for (int t = 0; t < 1000; ++t) {
        const cnc::Index g = 1 + rng.index(4), n = 1 + rng.index(50);
        cnc::Labels truth(n), pred(n);
        for (auto& v : truth) v = static_cast<int>(rng.index(g));
        for (auto& v : pred) v = static_cast<int>(rng.index(g));
        const double acc = cnc::clustering_accuracy(truth, pred);
        if (std::abs(acc - cnc::oracle::accuracy_by_permutation(truth, pred, g)) > 1e-15) ++acc_mismatch;
        std::vector<int> perm(g);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        cnc::Labels relabeled(n);
        for (std::size_t i = 0; i < n; ++i) relabeled[i] = perm[static_cast<std::size_t>(pred[i])];
        if (cnc::clustering_accuracy(truth, relabeled) != acc ||
            std::abs(cnc::nmi(truth, relabeled) - cnc::nmi(truth, pred)) > 1e-12)
            ++perm_fail;
    }
    // Hand-computed contingency [[2,1],[1,2]]: I = (2/3) ln(4/3) + (1/3) ln(2/3), H = ln 2.
    const double hand = ((2.0 / 3.0) * std::log(4.0 / 3.0) + (1.0 / 3.0) * std::log(2.0 / 3.0)) / std::log(2.0);
    const double got = cnc::nmi({0, 0, 0, 1, 1, 1}, cnc::Labels{0, 0, 1, 0, 1, 1});
    // 3x3 contingency [[3,1,0],[0,2,2],[1,0,3]], n = 12.
    const int table[3][3] = {{3, 1, 0}, {0, 2, 2}, {1, 0, 3}};
    cnc::Labels t3, p3;
    double rows[3] = {}, cols[3] = {};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int k = 0; k < table[a][b]; ++k) {
                p3.push_back(a);
                t3.push_back(b);
                rows[a] += 1;
                cols[b] += 1;
            }
    double mi = 0, hr = 0, hc = 0;
    for (int a = 0; a < 3; ++a) {
        hr -= rows[a] / 12 * std::log(rows[a] / 12);
        hc -= cols[a] / 12 * std::log(cols[a] / 12);
        for (int b = 0; b < 3; ++b)
            if (table[a][b]) mi += table[a][b] / 12.0 * std::log(table[a][b] / 12.0 / (rows[a] / 12 * cols[b] / 12));
    }
    const double err2 = std::abs(got - hand), err3 = std::abs(cnc::nmi(t3, p3) - mi / std::max(hr, hc));
    const bool ok = acc_mismatch == 0 && perm_fail == 0 && err2 < 1e-12 && err3 < 1e-12;
    return {ok, fmt("ACC vs permutation oracle mismatches %d/1000; relabeling failures %d/1000; NMI hand-value errors "
                    "%.2g, %.2g (tol 1e-12)",
                    acc_mismatch, perm_fail, err2, err3)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "cnc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int rc = cnc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (rc != 0) std::cerr << err.str();
    return rc;
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "cnc_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string src = CNC_SOURCE_DIR;
    const fs::path blobs = root / "blobs.csv", moons = root / "moons.bin";
    if (cli({"generate", "--kind", "blobs", "--n", "300", "--seed", "3", "--out", blobs.string()}) ||
        cli({"generate", "--kind", "moons", "--n", "300", "--noise", "0.05", "--seed", "4", "--format", "binary",
             "--out", moons.string()}))
        return {false, "fixture generation failed"};

    const std::vector<std::vector<std::string>> runs{
        {"--config", src + "/fixtures/two_triangles.cfg", "--input", src + "/fixtures/two_triangles.csv"},
        {"--input", blobs.string(), "--clusters", "3", "--batch", "100", "--epochs", "20", "--siamese-epochs", "3",
         "--train-fraction", "0.9", "--seed", "17"},
        {"--input", moons.string(), "--batch", "100", "--epochs", "15", "--siamese-epochs", "3", "--weight-mode",
         "gaussian", "--contrastive", "classical", "--seed", "99"},
    };
    int identical = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const fs::path first = root / ("run" + std::to_string(r));
        std::vector<std::string> args{"cluster"};
        args.insert(args.end(), runs[r].begin(), runs[r].end());
        args.insert(args.end(), {"--out-dir", first.string()});
        if (cli(args)) return {false, fmt("run %zu failed", r)};
        bool same = true;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path again = root / ("replay" + std::to_string(r) + "_" + std::to_string(rep));
            if (cli({"cluster", "--manifest", (first / "manifest.json").string(), "--out-dir", again.string()}))
                return {false, fmt("replay of run %zu failed", r)};
            for (const char* f : {"labels.csv", "loss_trace.csv"})
                same = same && slurp(first / f) == slurp(again / f) && !slurp(first / f).empty();
        }
        identical += same;
    }
    return {identical == static_cast<int>(runs.size()),
            fmt("%d/%zu manifests replayed twice with byte-identical labels.csv and loss_trace.csv", identical,
                runs.size())};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc == 3 && std::string(argv[1]) == "--only") only = std::atoi(argv[2]);
    struct Criterion {
        int id;
        const char* name;
        double budget;
        Outcome (*fn)();
    };
    const Criterion all[] = {
        {1, "two-triangle reproduction", 5, two_triangles},
        {2, "one-hot equivalence", 1, one_hot_equivalence},
        {3, "gradient correctness", 10, gradient_check},
        {4, "uniform-assignment identity", 0, uniform_identity},
        {5, "oracle proximity", 120, oracle_proximity},
        {6, "synthetic clustering", 0, synthetic_clustering},
        {7, "generalization", 0, generalization},
        {8, "metric correctness", 0, metric_correctness},
        {9, "determinism", 0, determinism},
    };
    int failures = 0;
    for (const auto& c : all)
        if (only == 0 || only == c.id) failures += !run_criterion(c.id, c.name, c.budget, c.fn);
    std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : fmt("%d CRITERIA FAILED", failures)) << std::endl;
    return failures == 0 ? 0 : 1;
}
