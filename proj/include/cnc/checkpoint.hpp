#ifndef CNC_CHECKPOINT_HPP
#define CNC_CHECKPOINT_HPP

// Text checkpoint, version 1. Every parameter is written as a C99 hex float
// so a save/load round trip is bit-exact.
//
//   cnc-checkpoint 1
//   seed <uint64>
//   lineage <free text to end of line>
//   layers <L>
//   layer <fan_in> <fan_out> <identity|relu|tanh>
//   W <fan_out hex floats>          (fan_in lines, row-major)
//   b <fan_out hex floats>
//   ... (repeated per layer)
//   end

#include "cnc/errors.hpp"
#include "cnc/model.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace cnc {

struct Checkpoint {
    MlpModel model;
    std::uint64_t seed = 0;
    std::string lineage;
};

namespace detail {

inline std::string hexfloat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline double parse_hexfloat(const std::string& tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw InputError("checkpoint: bad number '" + tok + "'");
    return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
    out << "cnc-checkpoint 1\n";
    out << "seed " << ck.seed << "\n";
    out << "lineage " << ck.lineage << "\n";
    out << "layers " << ck.model.layers().size() << "\n";
    for (const auto& l : ck.model.layers()) {
        out << "layer " << l.fan_in() << ' ' << l.fan_out() << ' ' << to_string(l.activation) << "\n";
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            out << 'W';
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out << ' ' << detail::hexfloat(l.weight(r, c));
            out << "\n";
        }
        out << 'b';
        for (Eigen::Index c = 0; c < l.bias.size(); ++c) out << ' ' << detail::hexfloat(l.bias[c]);
        out << "\n";
    }
    out << "end\n";
}

inline Checkpoint read_checkpoint(std::istream& in) {
    auto expect_word = [&](std::istringstream& ls, const std::string& word) {
        std::string w;
        if (!(ls >> w) || w != word) throw InputError("checkpoint: expected '" + word + "'");
    };
    auto next_line = [&](const char* what) {
        std::string line;
        if (!std::getline(in, line)) throw InputError(std::string("checkpoint: missing ") + what);
        return line;
    };

    Checkpoint ck;
    {
        std::istringstream ls(next_line("header"));
        expect_word(ls, "cnc-checkpoint");
        int version = 0;
        if (!(ls >> version) || version != 1) throw InputError("checkpoint: unsupported version");
    }
    {
        std::istringstream ls(next_line("seed"));
        expect_word(ls, "seed");
        if (!(ls >> ck.seed)) throw InputError("checkpoint: bad seed");
    }
    {
        const std::string line = next_line("lineage");
        if (line.rfind("lineage", 0) != 0) throw InputError("checkpoint: expected 'lineage'");
        ck.lineage = line.size() > 8 ? line.substr(8) : std::string();
    }
    std::size_t count = 0;
    {
        std::istringstream ls(next_line("layer count"));
        expect_word(ls, "layers");
        if (!(ls >> count)) throw InputError("checkpoint: bad layer count");
    }
    std::vector<Layer> layers;
    for (std::size_t t = 0; t < count; ++t) {
        Layer l;
        Eigen::Index in_dim = 0, out_dim = 0;
        std::string act;
        {
            std::istringstream ls(next_line("layer header"));
            expect_word(ls, "layer");
            if (!(ls >> in_dim >> out_dim >> act) || in_dim <= 0 || out_dim <= 0)
                throw InputError("checkpoint: bad layer header");
            try {
                l.activation = parse_activation(act);
            } catch (const ConfigError& e) {
                throw InputError(std::string("checkpoint: ") + e.what());
            }
        }
        l.weight.resize(in_dim, out_dim);
        l.bias.resize(out_dim);
        auto read_row = [&](char tag, auto&& set) {
            std::istringstream ls(next_line("parameter row"));
            expect_word(ls, std::string(1, tag));
            std::string tok;
            for (Eigen::Index c = 0; c < out_dim; ++c) {
                if (!(ls >> tok)) throw InputError("checkpoint: short parameter row");
                set(c, detail::parse_hexfloat(tok));
            }
            if (ls >> tok) throw InputError("checkpoint: long parameter row");
        };
        for (Eigen::Index r = 0; r < in_dim; ++r) read_row('W', [&](Eigen::Index c, double v) { l.weight(r, c) = v; });
        read_row('b', [&](Eigen::Index c, double v) { l.bias[c] = v; });
        layers.push_back(std::move(l));
    }
    {
        std::istringstream ls(next_line("end marker"));
        expect_word(ls, "end");
    }
    try {
        ck.model = MlpModel(std::move(layers));
    } catch (const DimensionMismatch& e) {
        throw InputError(std::string("checkpoint: ") + e.what());
    }
    if (!ck.model.all_finite()) throw InputError("checkpoint: non-finite parameters");
    return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint " + path);
    write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint " + path);
    return read_checkpoint(in);
}

}  // namespace cnc

#endif  // CNC_CHECKPOINT_HPP
