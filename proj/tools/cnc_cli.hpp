#ifndef CNC_TOOLS_CLI_HPP
#define CNC_TOOLS_CLI_HPP

// Command-line front end: cluster, eval, oracle, generate.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 malformed input, 3 training
// diverged, 4 invalid configuration, 5 oracle instance too large.

#include <cnc/cnc.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace cnc::cli {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

enum Exit : int { kOk = 0, kFailure = 1, kBadInput = 2, kDiverged = 3, kBadConfig = 4, kTooLarge = 5 };

struct ClusterOptions {
    std::string input;
    std::string format = "auto";
    std::string out_dir = "cnc_out";
    Index clusters = 2;
    Index embed_dim = 10;
    Index batch = 256;
    Index knn = 3;
    Index eval_knn = 0;  ///< 0: same as knn
    std::string weight_mode = "binary";
    std::string symmetrize = "union";
    std::string hidden = "64,64";
    std::string activation = "tanh";
    Index epochs = 200;
    Index max_steps = 5000;
    double lr = 0.005;
    double lr_decay = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double temp_start = 1.5;
    double temp_min = 0.5;
    double temp_decay = 0.95;
    double vol_eps = kDefaultVolumeEps;
    Index patience = 20;
    double min_delta = 1e-4;
    std::uint64_t seed = 0;
    double train_fraction = 1.0;
    bool skip_siamese = false;
    std::string siamese_hidden = "64,64";
    Index siamese_epochs = 30;
    Index siamese_knn = 3;
    Index siamese_batch = 128;
    double siamese_lr = 1e-3;
    Index neg_ratio = 1;
    std::string contrastive = "squared";
};

// ---------------------------------------------------------------------------
// Option <-> JSON, option -> TrainConfig
// ---------------------------------------------------------------------------

#define CNC_CLUSTER_FIELDS(X)                                                                                   \
    X(input) X(format) X(out_dir) X(clusters) X(embed_dim) X(batch) X(knn) X(eval_knn) X(weight_mode)          \
        X(symmetrize) X(hidden) X(activation) X(epochs) X(max_steps) X(lr) X(lr_decay) X(beta1) X(beta2)       \
            X(temp_start) X(temp_min) X(temp_decay) X(vol_eps) X(patience) X(min_delta) X(seed)                 \
                X(train_fraction) X(skip_siamese) X(siamese_hidden) X(siamese_epochs) X(siamese_knn)            \
                    X(siamese_batch) X(siamese_lr) X(neg_ratio) X(contrastive)

inline json to_json(const ClusterOptions& o) {
    json j = json::object();
#define CNC_PUT(f) j[#f] = o.f;
    CNC_CLUSTER_FIELDS(CNC_PUT)
#undef CNC_PUT
    return j;
}

inline ClusterOptions options_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ClusterOptions o;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        bool known = false;
        try {
#define CNC_GET(f)                          \
    if (key == #f) {                        \
        it.value().get_to(o.f);             \
        known = true;                       \
    }
            CNC_CLUSTER_FIELDS(CNC_GET)
#undef CNC_GET
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
        if (!known) throw ConfigError("unknown config key '" + key + "'");
    }
    return o;
}

inline std::vector<Index> parse_widths(const std::string& s) {
    std::vector<Index> out;
    if (s.empty() || s == "none") return out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            const long v = std::stol(tok, &pos);
            if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
            out.push_back(static_cast<Index>(v));
        } catch (const std::exception&) {
            throw ConfigError("bad layer width list '" + s + "'");
        }
    }
    return out;
}

inline WeightMode parse_weight_mode(const std::string& s) {
    if (s == "binary") return WeightMode::binary();
    if (s == "gaussian") return WeightMode::gaussian_auto();
    if (s.rfind("gaussian:", 0) == 0) {
        try {
            std::size_t pos = 0;
            const double sigma = std::stod(s.substr(9), &pos);
            if (pos == s.size() - 9 && sigma > 0.0) return WeightMode::gaussian(sigma);
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("weight mode must be binary, gaussian or gaussian:<sigma>, got '" + s + "'");
}

inline Symmetrization parse_symmetrization(const std::string& s) {
    if (s == "union") return Symmetrization::union_max;
    if (s == "mutual") return Symmetrization::mutual;
    throw ConfigError("symmetrize must be union or mutual, got '" + s + "'");
}

inline TrainConfig to_train_config(const ClusterOptions& o) {
    TrainConfig c;
    c.clusters = o.clusters;
    c.embed_dim = o.embed_dim;
    c.batch = o.batch;
    c.knn = o.knn;
    c.weight_mode = parse_weight_mode(o.weight_mode);
    c.symmetrization = parse_symmetrization(o.symmetrize);
    c.hidden = parse_widths(o.hidden);
    c.hidden_activation = parse_activation(o.activation);
    c.epochs = o.epochs;
    c.max_steps = o.max_steps;
    c.adam = {o.lr, o.beta1, o.beta2, 1e-8};
    c.lr_decay = o.lr_decay;
    c.gumbel = {o.temp_start, o.temp_min, o.temp_decay};
    c.vol_eps = o.vol_eps;
    c.seed = o.seed;
    c.patience = o.patience;
    c.min_delta = o.min_delta;
    c.siamese.hidden = parse_widths(o.siamese_hidden);
    c.siamese.epochs = o.siamese_epochs;
    c.siamese.knn = o.siamese_knn;
    c.siamese.pair_batch = o.siamese_batch;
    c.siamese.adam.lr = o.siamese_lr;
    c.siamese.neg_ratio = o.neg_ratio;
    if (o.contrastive == "squared")
        c.siamese.form = ContrastiveForm::squared_distance_hinge;
    else if (o.contrastive == "classical")
        c.siamese.form = ContrastiveForm::classical;
    else
        throw ConfigError("contrastive must be squared or classical, got '" + o.contrastive + "'");
    if (!(o.train_fraction > 0.0 && o.train_fraction <= 1.0)) throw ConfigError("train fraction must lie in (0,1]");
    return c;
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    out << text;
}

inline void write_loss_trace(std::ostream& out, const TrainReport& rep) {
    out << "step,epoch,loss,temperature,lr\n";
    for (const auto& s : rep.trace)
        out << s.step << ',' << s.epoch << ',' << fmt_double(s.loss) << ',' << fmt_double(s.temperature) << ','
            << fmt_double(s.lr) << '\n';
}

inline Matrix select_rows(const Matrix& x, const std::vector<Index>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
        out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
    return out;
}

/// ACC/NMI (when truth is available) and Ncut over a fresh k-NN graph of `points`.
inline json evaluate_block(const Matrix& points, const Labels& predicted, const Labels& truth, Index g, Index knn,
                           const WeightMode& mode, Symmetrization sym) {
    json j;
    j["n"] = predicted.size();
    const Index k = std::min<Index>(knn, points.rows() > 1 ? static_cast<Index>(points.rows()) - 1 : 0);
    if (k >= 1) {
        const AffinityGraph graph = build_knn_graph(points, k, mode, sym);
        j["ncut"] = exact_ncuts(Partition{predicted, g}, graph);
    } else {
        j["ncut"] = 0.0;
    }
    if (!truth.empty()) {
        j["acc"] = clustering_accuracy(truth, predicted);
        j["nmi"] = nmi(truth, predicted);
    } else {
        j["acc"] = nullptr;
        j["nmi"] = nullptr;
    }
    return j;
}

/// Runs `fn`, mapping library exceptions to exit codes.
inline int guarded(std::ostream& err, const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const InstanceTooLarge& e) {
        err << "error: " << e.what() << '\n';
        return kTooLarge;
    } catch (const NonFiniteLoss& e) {
        err << "error: training diverged: " << e.what() << '\n';
        return kDiverged;
    } catch (const AllVolumesZero& e) {
        err << "error: training diverged: " << e.what() << '\n';
        return kDiverged;
    } catch (const NonFiniteActivation& e) {
        err << "error: training diverged: " << e.what() << '\n';
        return kDiverged;
    } catch (const ConfigError& e) {
        err << "error: invalid configuration: " << e.what() << '\n';
        return kBadConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const json::exception& e) {
        err << "error: malformed JSON: " << e.what() << '\n';
        return kBadInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

inline int cmd_cluster(ClusterOptions o, std::ostream& log, std::ostream& err) {
    return guarded(err, [&]() -> int {
        if (o.input.empty()) throw ConfigError("--input is required");
        o.input = std::filesystem::absolute(o.input).lexically_normal().string();
        const Dataset data = load_dataset(o.input, o.format);
        const std::string digest = sha256_file(o.input);
        const auto n = static_cast<Index>(data.features.rows());
        if (!data.labels.empty() && data.labels.size() != n) throw InputError("label column length mismatch");

        TrainConfig cfg = to_train_config(o);
        Rng master(o.seed);
        Rng split_rng = master.split();
        Rng siamese_rng = master.split();
        Rng cnc_rng = master.split();

        std::vector<Index> train_idx, test_idx;
        if (o.train_fraction < 1.0) {
            const Split s = split_dataset(data.features, data.labels, o.train_fraction, split_rng);
            train_idx = s.train_index;
            test_idx = s.test_index;
        } else {
            train_idx.resize(n);
            for (Index i = 0; i < n; ++i) train_idx[i] = i;
        }
        const Matrix train_x = select_rows(data.features, train_idx);

        if (cfg.batch > train_idx.size()) {
            err << "note: batch size " << cfg.batch << " exceeds " << train_idx.size()
                << " training rows; using full-batch training\n";
            cfg.batch = train_idx.size();
            o.batch = cfg.batch;
        }
        cfg.validate();

        const std::filesystem::path out_dir(o.out_dir);
        std::filesystem::create_directories(out_dir);

        MlpModel embedder;
        Matrix embeddings = data.features;
        if (!o.skip_siamese) {
            SiameseReport srep;
            embedder = train_siamese(train_x, cfg, siamese_rng, &srep);
            embeddings = predict(embedder, data.features);
            log << "siamese: " << srep.positives << " positive / " << srep.negatives << " negative pairs, final loss "
                << (srep.epoch_loss.empty() ? 0.0 : srep.epoch_loss.back()) << '\n';
        }
        const Matrix train_emb = select_rows(embeddings, train_idx);
        CncResult res = train_cnc(train_emb, cfg, cnc_rng);
        log << "cnc: " << res.report.steps() << " steps, " << res.report.epochs_run << " epochs, final loss "
            << res.report.final_loss << " (" << res.report.stop_reason << ")\n";

        const Partition part = infer(res.model, embeddings);

        // Metrics on the evaluated split (the test split when one exists).
        const WeightMode mode = parse_weight_mode(o.weight_mode);
        const Symmetrization sym = parse_symmetrization(o.symmetrize);
        const Index eval_k = o.eval_knn > 0 ? o.eval_knn : o.knn;
        auto labels_of = [](const Labels& l, const std::vector<Index>& idx) {
            Labels out;
            if (l.empty()) return out;
            for (Index i : idx) out.push_back(l[i]);
            return out;
        };
        const std::vector<Index>& eval_idx = test_idx.empty() ? train_idx : test_idx;
        json metrics = evaluate_block(select_rows(embeddings, eval_idx), labels_of(part.labels, eval_idx),
                                      labels_of(data.labels, eval_idx), cfg.clusters, eval_k, mode, sym);
        metrics["evaluated_on"] = test_idx.empty() ? "all" : "test";
        metrics["clusters"] = cfg.clusters;
        metrics["eval_knn"] = eval_k;
        metrics["train"] = test_idx.empty() ? json(nullptr)
                                            : evaluate_block(train_emb, labels_of(part.labels, train_idx),
                                                             labels_of(data.labels, train_idx), cfg.clusters, eval_k,
                                                             mode, sym);
        std::vector<Index> sizes(cfg.clusters, 0);
        for (int l : part.labels) ++sizes[static_cast<std::size_t>(l)];
        metrics["cluster_sizes"] = sizes;
        metrics["final_loss"] = res.report.final_loss;
        metrics["steps"] = res.report.steps();
        metrics["epochs"] = res.report.epochs_run;
        metrics["stop_reason"] = res.report.stop_reason;

        {
            std::ofstream out(out_dir / "labels.csv", std::ios::binary);
            write_labels_csv(out, part.labels);
        }
        {
            std::ofstream out(out_dir / "loss_trace.csv", std::ios::binary);
            write_loss_trace(out, res.report);
        }
        write_text(out_dir / "metrics.json", metrics.dump(2) + "\n");
        save_checkpoint((out_dir / "model.ckpt").string(),
                        Checkpoint{res.model, o.seed, "cnc head; seed " + std::to_string(o.seed) + " stream 3"});
        json outputs = {{"labels", "labels.csv"},
                        {"metrics", "metrics.json"},
                        {"loss_trace", "loss_trace.csv"},
                        {"checkpoint", "model.ckpt"}};
        if (!o.skip_siamese) {
            save_checkpoint((out_dir / "embedder.ckpt").string(),
                            Checkpoint{embedder, o.seed, "siamese embedder; seed " + std::to_string(o.seed) + " stream 2"});
            outputs["embedder"] = "embedder.ckpt";
        }
        json manifest = {{"format_version", 1},
                         {"software", std::string("cnc ") + kVersion},
                         {"command", "cluster"},
                         {"seed", o.seed},
                         {"config", to_json(o)},
                         {"inputs", json::array({{{"path", o.input}, {"sha256", digest}}})},
                         {"outputs", outputs}};
        write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");

        log << "ncut " << metrics["ncut"].get<double>();
        if (!metrics["acc"].is_null())
            log << "  acc " << metrics["acc"].get<double>() << "  nmi " << metrics["nmi"].get<double>();
        log << "  -> " << out_dir.string() << '\n';
        return kOk;
    });
}

/// Re-runs a cluster command from its manifest after checking input digests.
inline int cmd_replay(const std::string& manifest_path, const std::string& out_dir_override, std::ostream& log,
                      std::ostream& err) {
    ClusterOptions o;
    const int rc = guarded(err, [&]() -> int {
        std::ifstream in(manifest_path);
        if (!in) throw InputError("cannot open manifest " + manifest_path);
        const json m = json::parse(in);
        if (m.value("command", "") != "cluster") throw InputError("manifest does not describe a cluster run");
        o = options_from_json(m.at("config"));
        for (const auto& inp : m.at("inputs")) {
            const std::string path = inp.at("path").get<std::string>();
            if (sha256_file(path) != inp.at("sha256").get<std::string>())
                throw InputError("input " + path + " does not match the manifest digest");
        }
        if (!out_dir_override.empty()) o.out_dir = out_dir_override;
        return kOk;
    });
    if (rc != kOk) return rc;
    return cmd_cluster(o, log, err);
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOptions {
    std::string input;
    std::string format = "auto";
    std::string labels;
    std::string true_labels;  ///< optional; defaults to the dataset label column
    std::string embedder;     ///< optional checkpoint; graph is built in its output space
    Index knn = 3;
    Index clusters = 0;  ///< 0: max label + 1
    std::string weight_mode = "binary";
    std::string symmetrize = "union";
    std::string out;
};

inline int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        const Dataset data = load_dataset(o.input, o.format);
        const Labels predicted = read_labels_csv(o.labels);
        const auto n = static_cast<Index>(data.features.rows());
        if (predicted.size() != n)
            throw LengthMismatch("labels file has " + std::to_string(predicted.size()) + " rows, dataset has " +
                                 std::to_string(n));
        Labels truth = data.labels;
        if (!o.true_labels.empty()) truth = read_labels_csv(o.true_labels);
        if (!truth.empty() && truth.size() != n) throw LengthMismatch("true labels and dataset differ in length");

        Index g = o.clusters;
        for (int l : predicted) g = std::max<Index>(g, static_cast<Index>(l) + 1);
        Matrix points = data.features;
        if (!o.embedder.empty()) points = predict(load_checkpoint(o.embedder).model, data.features);

        json r = evaluate_block(points, predicted, truth, g, o.knn, parse_weight_mode(o.weight_mode),
                                parse_symmetrization(o.symmetrize));
        r["clusters"] = g;
        r["knn"] = o.knn;
        const std::string text = r.dump(2) + "\n";
        out << text;
        if (!o.out.empty()) write_text(o.out, text);
        return kOk;
    });
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

struct OracleOptions {
    std::string input;  ///< dataset; graph is its k-NN graph
    std::string edges;  ///< alternatively an edge list CSV with header i,j,w
    std::string format = "auto";
    Index clusters = 2;
    Index knn = 3;
    std::string weight_mode = "binary";
    std::string symmetrize = "union";
};

inline AffinityGraph read_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open edge list " + path);
    std::string line;
    if (!std::getline(in, line)) throw InputError("edge list is empty");
    const auto header = detail::split_csv_line(line);
    if (header.size() != 3 || header[0] != "i" || header[1] != "j" || header[2] != "w")
        throw InputError("edge list header must be 'i,j,w'");
    std::vector<Edge> edges;
    Index n = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto c = detail::split_csv_line(line);
        if (c.size() != 3) throw InputError("edge list line " + std::to_string(lineno) + " is ragged");
        const auto i = static_cast<Index>(detail::parse_label(c[0], lineno));
        const auto j = static_cast<Index>(detail::parse_label(c[1], lineno));
        edges.push_back({i, j, detail::parse_double(c[2], lineno)});
        n = std::max({n, i + 1, j + 1});
    }
    try {
        return graph_from_edges(n, edges);
    } catch (const DegenerateBatch& e) {
        throw InputError(std::string("edge list: ") + e.what());
    }
}

inline int cmd_oracle(const OracleOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        AffinityGraph graph;
        if (!o.edges.empty()) {
            graph = read_edge_list(o.edges);
        } else if (!o.input.empty()) {
            const Dataset d = load_dataset(o.input, o.format);
            graph = build_knn_graph(d.features, o.knn, parse_weight_mode(o.weight_mode),
                                    parse_symmetrization(o.symmetrize));
        } else {
            throw ConfigError("oracle needs --input or --edges");
        }
        const OracleResult r = brute_force_min_ncuts(graph, o.clusters);
        json j = {{"n", graph.n}, {"clusters", o.clusters}, {"value", r.value}, {"labels", r.partition.labels}};
        out << j.dump() << '\n';
        return kOk;
    });
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateOptions {
    std::string kind = "blobs";
    Index n = 600;
    Index clusters = 3;
    Index dim = 2;
    double noise = 0.5;
    double radius = 5.0;
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "csv";
};

inline int cmd_generate(const GenerateOptions& o, std::ostream& log, std::ostream& err) {
    return guarded(err, [&]() -> int {
        if (o.out.empty()) throw ConfigError("--out is required");
        Rng rng(o.seed);
        Dataset d;
        if (o.kind == "triangles")
            d = two_triangles();
        else if (o.kind == "blobs")
            d = gaussian_blobs(o.n, o.clusters, o.dim, o.noise, o.radius, rng);
        else if (o.kind == "moons")
            d = two_moons(o.n, o.noise, rng);
        else
            throw ConfigError("unknown fixture kind '" + o.kind + "'");
        DataFormat f = DataFormat::csv;
        if (o.format == "binary")
            f = DataFormat::binary;
        else if (o.format != "csv")
            throw ConfigError("format must be csv or binary");
        save_dataset(o.out, d, f);
        log << "wrote " << d.features.rows() << " rows to " << o.out << '\n';
        return kOk;
    });
}

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

/// Splices `--config FILE` (cluster only) into flags placed before the
/// remaining command line, so explicit flags take precedence. Keys are flag
/// names without the leading dashes; underscores are accepted for dashes.
inline std::vector<std::string> expand_config_args(int argc, const char* const* argv) {
    std::vector<std::string> in(argv, argv + argc);
    std::vector<std::string> out;
    if (in.size() < 2 || in[1] != "cluster") return in;
    std::string file;
    std::vector<std::string> rest;
    for (std::size_t i = 2; i < in.size(); ++i) {
        if (in[i] == "--config" && i + 1 < in.size()) {
            file = in[++i];
        } else if (in[i].rfind("--config=", 0) == 0) {
            file = in[i].substr(9);
        } else {
            rest.push_back(in[i]);
        }
    }
    out = {in[0], in[1]};
    if (!file.empty()) {
        std::ifstream cf(file);
        if (!cf) throw ConfigError("cannot open config file " + file);
        static const std::vector<std::string> known = [] {
            std::vector<std::string> k;
#define CNC_NAME(f) k.push_back(#f);
            CNC_CLUSTER_FIELDS(CNC_NAME)
#undef CNC_NAME
            return k;
        }();
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(cf, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(file + ":" + std::to_string(lineno) + ": expected key=value");
            std::string key = detail::trim(line.substr(0, eq));
            std::string value = detail::trim(line.substr(eq + 1));
            std::replace(key.begin(), key.end(), '-', '_');
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw ConfigError(file + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
            std::replace(key.begin(), key.end(), '_', '-');
            if (key == "skip-siamese") {
                if (value == "true" || value == "1")
                    out.push_back("--skip-siamese");
                else if (value != "false" && value != "0")
                    throw ConfigError(file + ":" + std::to_string(lineno) + ": skip-siamese must be true or false");
                continue;
            }
            out.push_back("--" + key);
            out.push_back(value);
        }
    }
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"cnc: clustering by minimizing expected normalized cuts", "cnc"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("cnc ") + kVersion);

    ClusterOptions co;
    std::string manifest;
    auto* cluster = app.add_subcommand("cluster", "embed, train, infer and evaluate");
    cluster->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_file;
    cluster->add_option("--config", config_file, "key=value config file (flags override it)");
    cluster->add_option("--input", co.input, "dataset file (CSV with header or binary)");
    cluster->add_option("--format", co.format, "auto, csv or binary")->capture_default_str();
    cluster->add_option("--out-dir", co.out_dir, "output directory")->capture_default_str();
    cluster->add_option("--clusters,-g", co.clusters, "number of clusters g")->capture_default_str();
    cluster->add_option("--embed-dim", co.embed_dim, "Siamese embedding size d")->capture_default_str();
    cluster->add_option("--batch", co.batch, "minibatch size m")->capture_default_str();
    cluster->add_option("--knn", co.knn, "neighbors per node in the batch graph")->capture_default_str();
    cluster->add_option("--eval-knn", co.eval_knn, "neighbors for the evaluation graph (0: --knn)")->capture_default_str();
    cluster->add_option("--weight-mode", co.weight_mode, "binary, gaussian or gaussian:<sigma>")->capture_default_str();
    cluster->add_option("--symmetrize", co.symmetrize, "union or mutual")->capture_default_str();
    cluster->add_option("--hidden", co.hidden, "hidden widths of the clustering net")->capture_default_str();
    cluster->add_option("--activation", co.activation, "relu, tanh or identity")->capture_default_str();
    cluster->add_option("--epochs", co.epochs)->capture_default_str();
    cluster->add_option("--max-steps", co.max_steps)->capture_default_str();
    cluster->add_option("--lr", co.lr, "Adam learning rate")->capture_default_str();
    cluster->add_option("--lr-decay", co.lr_decay, "factor applied when the loss plateaus")->capture_default_str();
    cluster->add_option("--beta1", co.beta1)->capture_default_str();
    cluster->add_option("--beta2", co.beta2)->capture_default_str();
    cluster->add_option("--temp-start", co.temp_start)->capture_default_str();
    cluster->add_option("--temp-min", co.temp_min)->capture_default_str();
    cluster->add_option("--temp-decay", co.temp_decay, "per-epoch temperature factor")->capture_default_str();
    cluster->add_option("--vol-eps", co.vol_eps, "cluster volume clamp")->capture_default_str();
    cluster->add_option("--patience", co.patience, "early-stopping patience in epochs (0: off)")->capture_default_str();
    cluster->add_option("--min-delta", co.min_delta)->capture_default_str();
    cluster->add_option("--seed", co.seed)->capture_default_str();
    cluster->add_option("--train-fraction", co.train_fraction, "train on a random split; 1 uses all rows")
        ->capture_default_str();
    cluster->add_flag("--skip-siamese", co.skip_siamese, "use the input features as embeddings");
    cluster->add_option("--siamese-hidden", co.siamese_hidden)->capture_default_str();
    cluster->add_option("--siamese-epochs", co.siamese_epochs)->capture_default_str();
    cluster->add_option("--siamese-knn", co.siamese_knn)->capture_default_str();
    cluster->add_option("--siamese-batch", co.siamese_batch)->capture_default_str();
    cluster->add_option("--siamese-lr", co.siamese_lr)->capture_default_str();
    cluster->add_option("--neg-ratio", co.neg_ratio)->capture_default_str();
    cluster->add_option("--contrastive", co.contrastive, "squared or classical negative hinge")->capture_default_str();
    cluster->add_option("--manifest", manifest, "replay the run recorded in a manifest.json");

    EvalOptions eo;
    auto* eval = app.add_subcommand("eval", "score a labels file against a dataset");
    eval->add_option("--input", eo.input)->required();
    eval->add_option("--format", eo.format)->capture_default_str();
    eval->add_option("--labels", eo.labels, "labels.csv with an index,label header")->required();
    eval->add_option("--true-labels", eo.true_labels, "ground truth in the same format");
    eval->add_option("--embedder", eo.embedder, "build the graph in this checkpoint's output space");
    eval->add_option("--knn", eo.knn)->capture_default_str();
    eval->add_option("--clusters,-g", eo.clusters)->capture_default_str();
    eval->add_option("--weight-mode", eo.weight_mode)->capture_default_str();
    eval->add_option("--symmetrize", eo.symmetrize)->capture_default_str();
    eval->add_option("--out", eo.out, "also write the JSON result here");

    OracleOptions oo;
    auto* oracle = app.add_subcommand("oracle", "exact minimum Ncut by enumeration (small graphs)");
    oracle->add_option("--input", oo.input, "dataset; the graph is its k-NN graph");
    oracle->add_option("--edges", oo.edges, "edge list CSV with header i,j,w");
    oracle->add_option("--format", oo.format)->capture_default_str();
    oracle->add_option("--clusters,-g", oo.clusters)->capture_default_str();
    oracle->add_option("--knn", oo.knn)->capture_default_str();
    oracle->add_option("--weight-mode", oo.weight_mode)->capture_default_str();
    oracle->add_option("--symmetrize", oo.symmetrize)->capture_default_str();

    GenerateOptions go;
    auto* gen = app.add_subcommand("generate", "write a synthetic fixture");
    gen->add_option("--kind", go.kind, "triangles, blobs or moons")->capture_default_str();
    gen->add_option("--n", go.n)->capture_default_str();
    gen->add_option("--clusters,-g", go.clusters)->capture_default_str();
    gen->add_option("--dim", go.dim)->capture_default_str();
    gen->add_option("--noise", go.noise, "blob stddev or moon noise")->capture_default_str();
    gen->add_option("--radius", go.radius, "distance of blob centers from the origin")->capture_default_str();
    gen->add_option("--seed", go.seed)->capture_default_str();
    gen->add_option("--out", go.out)->required();
    gen->add_option("--format", go.format)->capture_default_str();

    std::vector<std::string> args;
    try {
        args = expand_config_args(argc, argv);
    } catch (const Error& e) {
        err << "error: invalid configuration: " << e.what() << '\n';
        return kBadConfig;
    }
    std::vector<const char*> expanded;
    for (const auto& a : args) expanded.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(expanded.size()), expanded.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << "cnc " << kVersion << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kBadConfig;
    }

    if (cluster->parsed()) {
        if (!manifest.empty()) {
            const auto* od = cluster->get_option("--out-dir");
            return cmd_replay(manifest, od->count() > 0 ? co.out_dir : std::string(), out, err);
        }
        return cmd_cluster(co, out, err);
    }
    if (eval->parsed()) return cmd_eval(eo, out, err);
    if (oracle->parsed()) return cmd_oracle(oo, out, err);
    if (gen->parsed()) return cmd_generate(go, out, err);
    return kFailure;
}

}  // namespace cnc::cli

#endif  // CNC_TOOLS_CLI_HPP
