#ifndef CNC_MODEL_HPP
#define CNC_MODEL_HPP

#include "cnc/affinity.hpp"
#include "cnc/errors.hpp"
#include "cnc/rng.hpp"
#include "cnc/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cnc {

enum class Activation { identity, relu, tanh };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::identity: break;
    }
    return "identity";
}

inline Activation parse_activation(std::string_view s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "identity" || s == "linear") return Activation::identity;
    throw ConfigError("unknown activation '" + std::string(s) + "'");
}

struct Layer {
    Matrix weight;  ///< fan_in x fan_out
    Vector bias;    ///< fan_out
    Activation activation = Activation::identity;

    Index fan_in() const { return static_cast<Index>(weight.rows()); }
    Index fan_out() const { return static_cast<Index>(weight.cols()); }
};

/// Feed-forward stack of affine + activation layers.
class MlpModel {
public:
    MlpModel() = default;
    explicit MlpModel(std::vector<Layer> layers) : layers_(std::move(layers)) { check_shapes(); }

    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }
    bool empty() const noexcept { return layers_.empty(); }

    Index input_dim() const { return layers_.empty() ? 0 : layers_.front().fan_in(); }
    Index output_dim() const { return layers_.empty() ? 0 : layers_.back().fan_out(); }

    Index parameter_count() const {
        Index c = 0;
        for (const auto& l : layers_) c += static_cast<Index>(l.weight.size() + l.bias.size());
        return c;
    }

    bool all_finite() const {
        return std::all_of(layers_.begin(), layers_.end(),
                           [](const Layer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
    }

    void check_shapes() const {
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = layers_[i];
            if (l.bias.size() != l.weight.cols()) throw DimensionMismatch("bias length differs from layer width");
            if (i > 0 && layers_[i - 1].fan_out() != l.fan_in())
                throw DimensionMismatch("layer " + std::to_string(i) + " input does not chain with previous output");
        }
    }

    friend bool operator==(const MlpModel& a, const MlpModel& b) {
        if (a.layers_.size() != b.layers_.size()) return false;
        for (std::size_t i = 0; i < a.layers_.size(); ++i) {
            const auto& x = a.layers_[i];
            const auto& y = b.layers_[i];
            if (x.activation != y.activation || x.weight.rows() != y.weight.rows() ||
                x.weight.cols() != y.weight.cols() || x.weight != y.weight || x.bias != y.bias)
                return false;
        }
        return true;
    }

private:
    std::vector<Layer> layers_;
};

/// Layer widths `input, hidden..., output`; hidden layers use `hidden_act`,
/// the last layer `output_act`. Weights and biases are uniform in
/// [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline MlpModel make_mlp(Index input_dim, const std::vector<Index>& hidden, Index output_dim, Activation hidden_act,
                         Activation output_act, Rng& rng) {
    if (input_dim == 0 || output_dim == 0) throw ConfigError("layer widths must be positive");
    std::vector<Index> dims{input_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(output_dim);
    std::vector<Layer> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        if (dims[i + 1] == 0) throw ConfigError("layer widths must be positive");
        const auto in = static_cast<Eigen::Index>(dims[i]);
        const auto out = static_cast<Eigen::Index>(dims[i + 1]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Layer l;
        l.weight.resize(in, out);
        l.bias.resize(out);
        for (Eigen::Index r = 0; r < in; ++r)
            for (Eigen::Index c = 0; c < out; ++c) l.weight(r, c) = rng.uniform(-bound, bound);
        for (Eigen::Index c = 0; c < out; ++c) l.bias[c] = rng.uniform(-bound, bound);
        l.activation = (i + 2 == dims.size()) ? output_act : hidden_act;
        layers.push_back(std::move(l));
    }
    return MlpModel(std::move(layers));
}

struct ForwardCache {
    std::vector<Matrix> inputs;          ///< input to each layer
    std::vector<Matrix> pre_activations; ///< affine output of each layer
};

struct ForwardResult {
    Matrix output;
    ForwardCache cache;
};

namespace detail {

inline void apply_activation(Activation a, const Matrix& pre, Matrix& out) {
    switch (a) {
        case Activation::identity: out = pre; break;
        case Activation::relu: out = pre.cwiseMax(0.0); break;
        case Activation::tanh: out = pre.array().tanh().matrix(); break;
    }
}

}  // namespace detail

inline ForwardResult forward(const MlpModel& model, const Matrix& x) {
    if (model.empty()) throw DimensionMismatch("model has no layers");
    if (static_cast<Index>(x.cols()) != model.input_dim())
        throw DimensionMismatch("input has " + std::to_string(x.cols()) + " columns, model expects " +
                                std::to_string(model.input_dim()));
    ForwardResult r;
    r.cache.inputs.reserve(model.layers().size());
    r.cache.pre_activations.reserve(model.layers().size());
    Matrix h = x;
    for (const auto& l : model.layers()) {
        Matrix pre = h * l.weight;
        pre.rowwise() += l.bias.transpose();
        r.cache.inputs.push_back(std::move(h));
        detail::apply_activation(l.activation, pre, h);
        r.cache.pre_activations.push_back(std::move(pre));
    }
    if (!h.allFinite()) throw NonFiniteActivation("forward pass produced non-finite activations");
    r.output = std::move(h);
    return r;
}

/// Forward pass without keeping the cache.
inline Matrix predict(const MlpModel& model, const Matrix& x) { return forward(model, x).output; }

struct Gradients {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;
    Matrix input;  ///< dL/dX

    static Gradients zeros_like(const MlpModel& m) {
        Gradients g;
        for (const auto& l : m.layers()) {
            g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
            g.bias.push_back(Vector::Zero(l.bias.size()));
        }
        return g;
    }

    void add(const Gradients& o) {
        for (std::size_t i = 0; i < weight.size(); ++i) {
            weight[i] += o.weight[i];
            bias[i] += o.bias[i];
        }
    }

    bool all_finite() const {
        for (std::size_t i = 0; i < weight.size(); ++i)
            if (!weight[i].allFinite() || !bias[i].allFinite()) return false;
        return true;
    }
};

/// Chain rule back through every layer given dL/d(output).
inline Gradients backward(const MlpModel& model, const ForwardCache& cache, const Matrix& upstream) {
    const auto& layers = model.layers();
    if (cache.inputs.size() != layers.size() || cache.pre_activations.size() != layers.size())
        throw DimensionMismatch("cache does not come from this model");
    if (upstream.cols() != static_cast<Eigen::Index>(model.output_dim()) ||
        upstream.rows() != cache.inputs.front().rows())
        throw DimensionMismatch("upstream gradient shape does not match model output");

    Gradients g;
    g.weight.resize(layers.size());
    g.bias.resize(layers.size());
    Matrix delta = upstream;
    for (std::size_t t = layers.size(); t-- > 0;) {
        const auto& l = layers[t];
        const Matrix& pre = cache.pre_activations[t];
        switch (l.activation) {
            case Activation::identity: break;
            case Activation::relu: delta = (pre.array() > 0.0).select(delta, 0.0); break;
            case Activation::tanh: delta = (delta.array() * (1.0 - pre.array().tanh().square())).matrix(); break;
        }
        g.weight[t] = cache.inputs[t].transpose() * delta;
        g.bias[t] = delta.colwise().sum().transpose();
        delta = delta * l.weight.transpose();
    }
    g.input = std::move(delta);
    return g;
}

// ---------------------------------------------------------------------------
// Gumbel softmax
// ---------------------------------------------------------------------------

/// n x g matrix of independent standard Gumbel draws.
inline Matrix sample_gumbel(Index n, Index g, Rng& rng) {
    Matrix noise(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(g));
    for (Eigen::Index i = 0; i < noise.rows(); ++i)
        for (Eigen::Index k = 0; k < noise.cols(); ++k) noise(i, k) = rng.gumbel();
    return noise;
}

/// Rowwise softmax((logits + noise) / temperature). With no noise this is a
/// plain tempered softmax.
inline Matrix gumbel_softmax(const Matrix& logits, double temperature, const Matrix* noise = nullptr) {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (noise && (noise->rows() != logits.rows() || noise->cols() != logits.cols()))
        throw DimensionMismatch("gumbel noise shape differs from logits");
    Matrix y(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < logits.cols(); ++k) {
            y(i, k) = (logits(i, k) + (noise ? (*noise)(i, k) : 0.0)) / temperature;
            mx = std::max(mx, y(i, k));
        }
        double s = 0.0;
        for (Eigen::Index k = 0; k < logits.cols(); ++k) {
            y(i, k) = std::exp(y(i, k) - mx);
            s += y(i, k);
        }
        for (Eigen::Index k = 0; k < logits.cols(); ++k) y(i, k) /= s;
    }
    return y;
}

/// dL/dlogits from dL/dY for Y = gumbel_softmax(logits, temperature, noise).
inline Matrix gumbel_softmax_backward(const Matrix& y, const Matrix& grad_y, double temperature) {
    if (y.rows() != grad_y.rows() || y.cols() != grad_y.cols())
        throw DimensionMismatch("gradient shape differs from softmax output");
    Matrix out(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        double dot = 0.0;
        for (Eigen::Index k = 0; k < y.cols(); ++k) dot += grad_y(i, k) * y(i, k);
        for (Eigen::Index k = 0; k < y.cols(); ++k) out(i, k) = y(i, k) * (grad_y(i, k) - dot) / temperature;
    }
    return out;
}

struct GumbelSchedule {
    double start_temperature = 1.5;
    double min_temperature = 0.5;
    double decay = 0.95;  ///< per epoch

    void validate() const {
        if (!(min_temperature > 0.0) || !(start_temperature > 0.0))
            throw ConfigError("temperatures must be positive");
        if (min_temperature > start_temperature) throw ConfigError("min temperature exceeds start temperature");
        if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("temperature decay must lie in (0,1]");
    }

    double at_epoch(long epoch) const {
        return std::max(start_temperature * std::pow(decay, static_cast<double>(epoch)), min_temperature);
    }
};

// ---------------------------------------------------------------------------
// Siamese contrastive loss and pair sampling
// ---------------------------------------------------------------------------

enum class Polarity { positive, negative };

enum class ContrastiveForm {
    squared_distance_hinge,  ///< negative: max(1 - |d|^2, 0)^2
    classical,               ///< negative: max(1 - |d|, 0)^2
};

struct ContrastiveTerm {
    double loss = 0.0;
    Vector grad_a;
    Vector grad_b;
};

/// Positive pairs: |va - vb|^2. Negative pairs use a unit margin hinge,
/// squared; `form` selects whether the hinge acts on squared or plain distance.
inline ContrastiveTerm contrastive_loss(const Vector& va, const Vector& vb, Polarity polarity,
                                        ContrastiveForm form = ContrastiveForm::squared_distance_hinge) {
    if (va.size() != vb.size()) throw DimensionMismatch("embedding dimensions differ");
    const Vector diff = va - vb;
    const double sq = diff.squaredNorm();
    ContrastiveTerm t;
    if (polarity == Polarity::positive) {
        t.loss = sq;
        t.grad_a = 2.0 * diff;
    } else if (form == ContrastiveForm::squared_distance_hinge) {
        const double h = 1.0 - sq;
        if (h > 0.0) {
            t.loss = h * h;
            t.grad_a = -4.0 * h * diff;
        } else {
            t.grad_a = Vector::Zero(diff.size());
        }
    } else {
        const double dist = std::sqrt(sq);
        const double h = 1.0 - dist;
        if (h > 0.0) {
            t.loss = h * h;
            t.grad_a = dist > 0.0 ? Vector(-2.0 * h / dist * diff) : Vector::Zero(diff.size());
        } else {
            t.grad_a = Vector::Zero(diff.size());
        }
    }
    t.grad_b = -t.grad_a;
    return t;
}

struct Pair {
    Index a;
    Index b;
    Polarity polarity;

    friend bool operator==(const Pair&, const Pair&) = default;
};

struct PairBatch {
    std::vector<Pair> pairs;

    Index count(Polarity p) const {
        return static_cast<Index>(
            std::count_if(pairs.begin(), pairs.end(), [p](const Pair& x) { return x.polarity == p; }));
    }
};

/// Positives: each point with each of its k nearest neighbors. Negatives:
/// uniformly drawn pairs that are k-NN in neither direction, `neg_ratio` per
/// positive.
inline PairBatch make_pairs(const Matrix& x, Index k, Index neg_ratio, Rng& rng) {
    const auto n = static_cast<Index>(x.rows());
    if (k == 0) throw ConfigError("k must be positive");
    if (n < k + 2)
        throw DegenerateDataset("pair sampling needs at least k+2=" + std::to_string(k + 2) + " points, got " +
                                std::to_string(n));
    if (!x.allFinite()) throw DegenerateDataset("dataset contains non-finite values");
    const NeighborLists nn = nearest_neighbors(x, k);

    std::vector<std::vector<Index>> sorted_nn(n);
    for (Index i = 0; i < n; ++i) {
        sorted_nn[i] = nn.index[i];
        std::sort(sorted_nn[i].begin(), sorted_nn[i].end());
    }
    auto is_neighbor = [&](Index a, Index b) {
        return std::binary_search(sorted_nn[a].begin(), sorted_nn[a].end(), b) ||
               std::binary_search(sorted_nn[b].begin(), sorted_nn[b].end(), a);
    };
    // Points with at least one admissible negative partner.
    std::vector<Index> has_partner;
    for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < n; ++b)
            if (a != b && !is_neighbor(a, b)) {
                has_partner.push_back(a);
                break;
            }
    if (neg_ratio > 0 && has_partner.empty()) throw DegenerateDataset("every pair of points is a k-NN pair");

    PairBatch batch;
    batch.pairs.reserve(n * k * (1 + neg_ratio));
    for (Index i = 0; i < n; ++i)
        for (Index j : nn.index[i]) batch.pairs.push_back({i, j, Polarity::positive});

    const Index negatives = n * k * neg_ratio;
    std::vector<Index> candidates;
    for (Index t = 0; t < negatives; ++t) {
        const Index a = has_partner[rng.index(has_partner.size())];
        Index b = n;
        for (int attempt = 0; attempt < 32 && b == n; ++attempt) {
            const Index c = rng.index(n);
            if (c != a && !is_neighbor(a, c)) b = c;
        }
        if (b == n) {
            candidates.clear();
            for (Index c = 0; c < n; ++c)
                if (c != a && !is_neighbor(a, c)) candidates.push_back(c);
            b = candidates[rng.index(candidates.size())];
        }
        batch.pairs.push_back({a, b, Polarity::negative});
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(const MlpModel& model, AdamConfig cfg) : cfg_(cfg), m_(Gradients::zeros_like(model)), v_(m_) {}

    long steps() const noexcept { return t_; }

    /// One update with the given learning rate. Throws NonFiniteLoss if the
    /// parameters stop being finite.
    void step(MlpModel& model, const Gradients& g, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        auto& layers = model.layers();
        for (std::size_t i = 0; i < layers.size(); ++i) {
            update(layers[i].weight, g.weight[i], m_.weight[i], v_.weight[i], lr, c1, c2);
            update(layers[i].bias, g.bias[i], m_.bias[i], v_.bias[i], lr, c1, c2);
        }
        if (!model.all_finite()) throw NonFiniteLoss("parameters became non-finite after update", t_);
    }

private:
    template <typename P, typename G>
    void update(P& param, const G& grad, G& m, G& v, double lr, double c1, double c2) const {
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
        v = (cfg_.beta2 * v.array() + (1.0 - cfg_.beta2) * grad.array().square()).matrix();
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
    }

    AdamConfig cfg_;
    Gradients m_;
    Gradients v_;
    long t_ = 0;
};

}  // namespace cnc

#endif  // CNC_MODEL_HPP
