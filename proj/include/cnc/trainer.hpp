#ifndef CNC_TRAINER_HPP
#define CNC_TRAINER_HPP

// End-to-end CNC: Siamese embedding, minibatch minimization of expected
// normalized cuts over per-batch k-NN graphs, argmax inference.

#include "cnc/affinity.hpp"
#include "cnc/errors.hpp"
#include "cnc/loss.hpp"
#include "cnc/metrics.hpp"
#include "cnc/model.hpp"
#include "cnc/rng.hpp"
#include "cnc/types.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace cnc {

struct SiameseConfig {
    std::vector<Index> hidden{64, 64};
    Activation activation = Activation::relu;
    Index knn = 3;        ///< neighbors labeled positive
    Index neg_ratio = 1;  ///< negatives per positive
    Index epochs = 30;
    Index pair_batch = 128;
    AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
    ContrastiveForm form = ContrastiveForm::squared_distance_hinge;
};

struct TrainConfig {
    Index clusters = 2;    ///< g
    Index embed_dim = 10;  ///< d, output width of the Siamese network
    Index batch = 256;     ///< m
    Index knn = 3;
    WeightMode weight_mode = WeightMode::binary();
    Symmetrization symmetrization = Symmetrization::union_max;

    std::vector<Index> hidden{64, 64};
    Activation hidden_activation = Activation::tanh;

    Index epochs = 200;
    Index max_steps = 5000;
    AdamConfig adam{0.005, 0.9, 0.999, 1e-8};
    double lr_decay = 0.5;
    GumbelSchedule gumbel{1.5, 0.5, 0.95};
    double vol_eps = kDefaultVolumeEps;
    std::uint64_t seed = 0;

    /// Early stopping on the smoothed loss: stop after `patience` epochs
    /// without an improvement of at least `min_delta`; 0 disables it.
    Index patience = 20;
    double min_delta = 1e-4;
    Index smooth_window = 20;

    SiameseConfig siamese;

    void validate() const {
        if (clusters < 1) throw ConfigError("cluster count must be at least 1");
        if (knn < 1) throw ConfigError("knn must be positive");
        if (batch <= knn) throw ConfigError("batch size must exceed knn");
        if (embed_dim < 1) throw ConfigError("embedding dimension must be positive");
        if (epochs < 1 || max_steps < 1) throw ConfigError("epochs and max_steps must be positive");
        if (!(adam.lr > 0.0) || !(adam.eps > 0.0)) throw ConfigError("learning rate and Adam eps must be positive");
        if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
            throw ConfigError("Adam betas must lie in [0,1)");
        if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr decay must lie in (0,1]");
        if (!(vol_eps > 0.0)) throw ConfigError("volume eps must be positive");
        if (smooth_window < 1) throw ConfigError("smoothing window must be positive");
        if (!(min_delta >= 0.0)) throw ConfigError("min_delta must be non-negative");
        gumbel.validate();
        if (siamese.knn < 1 || siamese.epochs < 1 || siamese.pair_batch < 1)
            throw ConfigError("siamese knn, epochs and pair batch must be positive");
        if (!(siamese.adam.lr > 0.0)) throw ConfigError("siamese learning rate must be positive");
        for (Index h : hidden)
            if (h == 0) throw ConfigError("hidden widths must be positive");
        for (Index h : siamese.hidden)
            if (h == 0) throw ConfigError("siamese hidden widths must be positive");
    }
};

struct StepRecord {
    long step = 0;
    long epoch = 0;
    double loss = 0.0;
    double temperature = 0.0;
    double lr = 0.0;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct TrainReport {
    std::vector<StepRecord> trace;
    std::vector<double> epoch_temperature;
    double final_loss = 0.0;  ///< mean over the last smooth_window steps
    long epochs_run = 0;
    std::string stop_reason;
    double wall_seconds = 0.0;

    long steps() const { return static_cast<long>(trace.size()); }

    /// Mean loss over the `window` steps ending at `step` (1-based count).
    double smoothed(long step, long window) const {
        const long hi = std::min<long>(step, steps());
        const long lo = std::max<long>(0, hi - window);
        if (hi <= lo) return 0.0;
        double s = 0.0;
        for (long i = lo; i < hi; ++i) s += trace[static_cast<std::size_t>(i)].loss;
        return s / static_cast<double>(hi - lo);
    }
};

struct CncResult {
    MlpModel model;
    TrainReport report;
};

namespace detail {

struct Batch {
    Matrix features;
    AffinityGraph graph;
};

/// Shared optimization loop. `next_batch(epoch, index)` supplies the
/// features and affinity graph of each minibatch.
template <typename NextBatch>
CncResult optimize_cnc(Index input_dim, Index batches_per_epoch, NextBatch&& next_batch, const TrainConfig& cfg,
                       Rng& rng) {
    const auto started = std::chrono::steady_clock::now();
    CncResult res;
    res.model = make_mlp(input_dim, cfg.hidden, cfg.clusters, cfg.hidden_activation, Activation::identity, rng);
    Adam adam(res.model, cfg.adam);
    double lr = cfg.adam.lr;
    auto& rep = res.report;

    double best = std::numeric_limits<double>::infinity();
    Index stale = 0;
    long step = 0;
    rep.stop_reason = "epochs";
    for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double tau = cfg.gumbel.at_epoch(static_cast<long>(epoch));
        rep.epoch_temperature.push_back(tau);
        bool out_of_steps = false;
        for (Index b = 0; b < batches_per_epoch; ++b) {
            if (step >= static_cast<long>(cfg.max_steps)) {
                out_of_steps = true;
                break;
            }
            Batch batch = next_batch(epoch, b);
            ForwardResult fw = forward(res.model, batch.features);
            const Matrix noise = sample_gumbel(static_cast<Index>(fw.output.rows()), cfg.clusters, rng);
            const Matrix y = gumbel_softmax(fw.output, tau, &noise);
            NcutsEvaluation ev;
            try {
                ev = evaluate_expected_ncuts(y, batch.graph, cfg.vol_eps, true);
            } catch (const AllVolumesZero& e) {
                throw AllVolumesZero(std::string(e.what()) + " at step " + std::to_string(step), step);
            }
            if (!std::isfinite(ev.loss) || !ev.grad.allFinite()) throw NonFiniteLoss("CNC loss is not finite", step);
            const Matrix dlogits = gumbel_softmax_backward(y, ev.grad, tau);
            const Gradients grads = backward(res.model, fw.cache, dlogits);
            if (!grads.all_finite()) throw NonFiniteLoss("CNC gradient is not finite", step);
            adam.step(res.model, grads, lr);
            rep.trace.push_back({step, static_cast<long>(epoch), ev.loss, tau, lr});
            ++step;
        }
        if (!out_of_steps) rep.epochs_run = static_cast<long>(epoch) + 1;
        if (out_of_steps) {
            rep.stop_reason = "max_steps";
            break;
        }
        if (step >= static_cast<long>(cfg.max_steps)) {
            rep.stop_reason = "max_steps";
            break;
        }
        if (cfg.patience > 0) {
            const double smooth = rep.smoothed(step, static_cast<long>(cfg.smooth_window));
            if (smooth < best - cfg.min_delta) {
                best = smooth;
                stale = 0;
            } else {
                ++stale;
                const Index half = std::max<Index>(1, cfg.patience / 2);
                if (stale >= cfg.patience) {
                    rep.stop_reason = "converged";
                    break;
                }
                if (stale % half == 0) lr *= cfg.lr_decay;
            }
        }
    }
    rep.final_loss = rep.smoothed(rep.steps(), static_cast<long>(cfg.smooth_window));
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return res;
}

}  // namespace detail

/// Shuffles 0..n-1 and cuts it into floor(n / m) disjoint batches of size m;
/// the remainder is left out.
inline std::vector<std::vector<Index>> epoch_batches(Index n, Index m, Rng& rng) {
    if (m == 0) throw ConfigError("batch size must be positive");
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);
    std::vector<std::vector<Index>> out(n / m);
    for (Index b = 0; b < out.size(); ++b)
        out[b].assign(order.begin() + static_cast<std::ptrdiff_t>(b * m),
                      order.begin() + static_cast<std::ptrdiff_t>((b + 1) * m));
    return out;
}

/// Minibatch CNC training over embeddings, one fresh epoch_batches() draw per
/// epoch and a k-NN graph per batch.
inline CncResult train_cnc(const Matrix& embeddings, const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto n = static_cast<Index>(embeddings.rows());
    if (n < cfg.batch)
        throw ConfigError("need at least batch=" + std::to_string(cfg.batch) + " embeddings, got " + std::to_string(n));
    if (!embeddings.allFinite()) throw DegenerateBatch("embeddings contain non-finite values");

    std::vector<std::vector<Index>> batches;
    long drawn_epoch = -1;
    auto next = [&](Index epoch, Index b) {
        if (static_cast<long>(epoch) != drawn_epoch) {
            batches = epoch_batches(n, cfg.batch, rng);
            drawn_epoch = static_cast<long>(epoch);
        }
        EmbeddingBatch eb;
        eb.source_indices = batches[b];
        eb.vectors.resize(static_cast<Eigen::Index>(cfg.batch), embeddings.cols());
        for (Index r = 0; r < cfg.batch; ++r)
            eb.vectors.row(static_cast<Eigen::Index>(r)) = embeddings.row(static_cast<Eigen::Index>(eb.source_indices[r]));
        detail::Batch batch;
        batch.graph = build_knn_graph(eb, cfg.knn, cfg.weight_mode, cfg.symmetrization);
        batch.features = std::move(eb.vectors);
        return batch;
    };
    return detail::optimize_cnc(static_cast<Index>(embeddings.cols()), n / cfg.batch, next, cfg, rng);
}

/// Full-batch CNC training on a fixed graph whose nodes carry `features`
/// (for example one-hot node ids). batch, knn and weight settings are unused.
inline CncResult train_cnc_on_graph(const Matrix& features, const AffinityGraph& graph, const TrainConfig& cfg,
                                    Rng& rng) {
    TrainConfig c = cfg;
    c.batch = std::max<Index>(c.batch, c.knn + 1);
    c.validate();
    if (static_cast<Index>(features.rows()) != graph.n) throw DimensionMismatch("one feature row per graph node");
    detail::Batch fixed{features, graph};
    auto next = [&](Index, Index) { return fixed; };
    return detail::optimize_cnc(static_cast<Index>(features.cols()), 1, next, c, rng);
}

/// Argmax of the noise-free softmax output; ties go to the lowest cluster id.
inline Partition infer(const MlpModel& model, const Matrix& embeddings) {
    const Matrix y = gumbel_softmax(predict(model, embeddings), 1.0);
    Partition p;
    p.g = model.output_dim();
    p.labels.resize(static_cast<std::size_t>(y.rows()));
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < y.cols(); ++k)
            if (y(i, k) > y(i, best)) best = k;
        p.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return p;
}

struct SiameseReport {
    std::vector<double> epoch_loss;  ///< mean contrastive loss per pair, per epoch
    Index positives = 0;
    Index negatives = 0;
};

/// Trains the Siamese embedder G: R^in -> R^d on k-NN positive pairs and
/// sampled negatives.
inline MlpModel train_siamese(const Matrix& x, const TrainConfig& cfg, Rng& rng, SiameseReport* report = nullptr) {
    cfg.validate();
    if (x.rows() == 0 || x.cols() == 0) throw DegenerateDataset("empty dataset");
    if (!x.allFinite()) throw DegenerateDataset("dataset contains non-finite values");
    const SiameseConfig& s = cfg.siamese;
    const PairBatch pairs = make_pairs(x, s.knn, s.neg_ratio, rng);
    MlpModel model = make_mlp(static_cast<Index>(x.cols()), s.hidden, cfg.embed_dim, s.activation,
                              Activation::identity, rng);
    Adam adam(model, s.adam);
    SiameseReport rep;
    rep.positives = pairs.count(Polarity::positive);
    rep.negatives = pairs.count(Polarity::negative);

    std::vector<Index> order(pairs.pairs.size());
    std::iota(order.begin(), order.end(), Index{0});
    long step = 0;
    for (Index epoch = 0; epoch < s.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (Index start = 0; start < order.size(); start += s.pair_batch) {
            const Index len = std::min<Index>(s.pair_batch, order.size() - start);
            Matrix xa(static_cast<Eigen::Index>(len), x.cols());
            Matrix xb(static_cast<Eigen::Index>(len), x.cols());
            for (Index r = 0; r < len; ++r) {
                const Pair& p = pairs.pairs[order[start + r]];
                xa.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(p.a));
                xb.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(p.b));
            }
            const ForwardResult fa = forward(model, xa);
            const ForwardResult fb = forward(model, xb);
            Matrix ga(fa.output.rows(), fa.output.cols());
            Matrix gb(fb.output.rows(), fb.output.cols());
            double batch_loss = 0.0;
            const double scale = 1.0 / static_cast<double>(len);
            for (Index r = 0; r < len; ++r) {
                const auto rr = static_cast<Eigen::Index>(r);
                const ContrastiveTerm t = contrastive_loss(fa.output.row(rr).transpose(), fb.output.row(rr).transpose(),
                                                           pairs.pairs[order[start + r]].polarity, s.form);
                batch_loss += t.loss;
                ga.row(rr) = scale * t.grad_a.transpose();
                gb.row(rr) = scale * t.grad_b.transpose();
            }
            if (!std::isfinite(batch_loss)) throw NonFiniteLoss("contrastive loss is not finite", step);
            Gradients g = backward(model, fa.cache, ga);
            g.add(backward(model, fb.cache, gb));
            if (!g.all_finite()) throw NonFiniteLoss("contrastive gradient is not finite", step);
            adam.step(model, g, s.adam.lr);
            epoch_loss += batch_loss;
            ++step;
        }
        rep.epoch_loss.push_back(order.empty() ? 0.0 : epoch_loss / static_cast<double>(order.size()));
    }
    if (report) *report = std::move(rep);
    return model;
}

struct Split {
    std::vector<Index> train_index;
    std::vector<Index> test_index;
    Matrix train_x;
    Matrix test_x;
    Labels train_labels;  ///< empty when no labels were given
    Labels test_labels;
};

/// Random disjoint split; round(n * train_fraction) rows go to training.
inline Split split_dataset(const Matrix& x, const Labels& labels, double train_fraction, Rng& rng) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0,1)");
    const auto n = static_cast<Index>(x.rows());
    if (!labels.empty() && labels.size() != n) throw LengthMismatch("labels and rows differ in length");
    const auto n_train = static_cast<Index>(std::llround(static_cast<double>(n) * train_fraction));
    if (n_train == 0 || n_train >= n)
        throw EmptySplit("fraction " + std::to_string(train_fraction) + " of " + std::to_string(n) +
                         " rows leaves one side empty");
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    rng.shuffle(perm);
    Split s;
    s.train_index.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test_index.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(s.train_index.begin(), s.train_index.end());
    std::sort(s.test_index.begin(), s.test_index.end());
    auto gather = [&](const std::vector<Index>& idx, Matrix& out, Labels& lab) {
        out.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
            if (!labels.empty()) lab.push_back(labels[idx[r]]);
        }
    };
    gather(s.train_index, s.train_x, s.train_labels);
    gather(s.test_index, s.test_x, s.test_labels);
    return s;
}

}  // namespace cnc

#endif  // CNC_TRAINER_HPP
