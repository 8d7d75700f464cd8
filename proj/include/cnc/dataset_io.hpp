#ifndef CNC_DATASET_IO_HPP
#define CNC_DATASET_IO_HPP

// Dataset files.
//
// CSV: a header row naming every column; a column named `label` (optional)
// holds non-negative integer class ids, every other column is a feature.
//
// Binary (little-endian):
//   "CNCF"  u32 n  u32 m  f64[n*m] row-major features
//   optionally followed by  "CNCL"  i64[n] labels

#include "cnc/errors.hpp"
#include "cnc/fixtures.hpp"
#include "cnc/types.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace cnc {

enum class DataFormat { csv, binary };

inline constexpr char kBinaryMagic[4] = {'C', 'N', 'C', 'F'};
inline constexpr char kLabelMagic[4] = {'C', 'N', 'C', 'L'};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') throw InputError("line " + std::to_string(line) + ": '" + s + "' is not a number");
    if (!std::isfinite(v)) throw InputError("line " + std::to_string(line) + ": non-finite value");
    return v;
}

inline int parse_label(const std::string& s, std::size_t line) {
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0' || v < 0 || v > INT32_MAX)
        throw InputError("line " + std::to_string(line) + ": label '" + s + "' is not a non-negative integer");
    return static_cast<int>(v);
}

template <typename T>
void put_le(std::ostream& out, T v) {
    static_assert(std::endian::native == std::endian::little, "binary dataset IO assumes a little-endian host");
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
bool get_le(std::istream& in, T& v) {
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

}  // namespace detail

inline Dataset read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("CSV is empty (header row required)");
    const auto header = detail::split_csv_line(line);
    int label_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c].empty()) throw InputError("CSV header has an empty column name");
        if (header[c] == "label") {
            if (label_col >= 0) throw InputError("CSV header names 'label' twice");
            label_col = static_cast<int>(c);
        }
    }
    const std::size_t n_feat = header.size() - (label_col >= 0 ? 1 : 0);
    if (n_feat == 0) throw InputError("CSV has no feature columns");

    std::vector<double> values;
    Dataset d;
    std::size_t rows = 0, lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw InputError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                             " columns, found " + std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (static_cast<int>(c) == label_col)
                d.labels.push_back(detail::parse_label(cells[c], lineno));
            else
                values.push_back(detail::parse_double(cells[c], lineno));
        }
        ++rows;
    }
    if (rows == 0) throw InputError("CSV has no data rows");
    d.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n_feat));
    std::memcpy(d.features.data(), values.data(), values.size() * sizeof(double));
    return d;
}

inline void write_csv(std::ostream& out, const Dataset& d) {
    for (Eigen::Index c = 0; c < d.features.cols(); ++c) out << (c ? "," : "") << 'x' << c;
    if (!d.labels.empty()) out << ",label";
    out << '\n';
    char buf[40];
    for (Eigen::Index r = 0; r < d.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < d.features.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", d.features(r, c));
            out << (c ? "," : "") << buf;
        }
        if (!d.labels.empty()) out << ',' << d.labels[static_cast<std::size_t>(r)];
        out << '\n';
    }
}

inline Dataset read_binary(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kBinaryMagic, 4) != 0) throw InputError("binary dataset: bad magic");
    std::uint32_t n = 0, m = 0;
    if (!detail::get_le(in, n) || !detail::get_le(in, m)) throw InputError("binary dataset: truncated header");
    if (n == 0 || m == 0) throw InputError("binary dataset: empty matrix");
    Dataset d;
    d.features.resize(n, m);
    for (Eigen::Index i = 0; i < d.features.size(); ++i) {
        double v;
        if (!detail::get_le(in, v)) throw InputError("binary dataset: truncated payload");
        if (!std::isfinite(v)) throw InputError("binary dataset: non-finite value");
        d.features.data()[i] = v;
    }
    if (in.peek() == std::char_traits<char>::eof()) return d;
    if (!in.read(magic, 4) || std::memcmp(magic, kLabelMagic, 4) != 0) throw InputError("binary dataset: bad label block");
    d.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::int64_t v;
        if (!detail::get_le(in, v)) throw InputError("binary dataset: truncated labels");
        if (v < 0 || v > INT32_MAX) throw InputError("binary dataset: label out of range");
        d.labels[i] = static_cast<int>(v);
    }
    if (in.peek() != std::char_traits<char>::eof()) throw InputError("binary dataset: trailing bytes");
    return d;
}

inline void write_binary(std::ostream& out, const Dataset& d) {
    out.write(kBinaryMagic, 4);
    detail::put_le(out, static_cast<std::uint32_t>(d.features.rows()));
    detail::put_le(out, static_cast<std::uint32_t>(d.features.cols()));
    for (Eigen::Index i = 0; i < d.features.size(); ++i) detail::put_le(out, d.features.data()[i]);
    if (d.labels.empty()) return;
    out.write(kLabelMagic, 4);
    for (int l : d.labels) detail::put_le(out, static_cast<std::int64_t>(l));
}

/// Guesses the format from the first bytes when `format` is empty.
inline Dataset load_dataset(const std::string& path, const std::string& format = "auto") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open dataset " + path);
    DataFormat f;
    if (format == "csv") {
        f = DataFormat::csv;
    } else if (format == "binary" || format == "bin") {
        f = DataFormat::binary;
    } else if (format == "auto" || format.empty()) {
        char head[4] = {};
        in.read(head, 4);
        f = (in.gcount() == 4 && std::memcmp(head, kBinaryMagic, 4) == 0) ? DataFormat::binary : DataFormat::csv;
        in.clear();
        in.seekg(0);
    } else {
        throw ConfigError("unknown dataset format '" + format + "'");
    }
    return f == DataFormat::csv ? read_csv(in) : read_binary(in);
}

inline void save_dataset(const std::string& path, const Dataset& d, DataFormat f = DataFormat::csv) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write dataset " + path);
    if (f == DataFormat::csv)
        write_csv(out, d);
    else
        write_binary(out, d);
}

/// labels.csv as written by `cnc cluster`: header `index,label`.
inline Labels read_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open labels file " + path);
    std::string line;
    if (!std::getline(in, line)) throw InputError("labels file is empty");
    const auto header = detail::split_csv_line(line);
    int col = -1;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == "label") col = static_cast<int>(c);
    if (col < 0) throw InputError("labels file has no 'label' column");
    Labels out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) throw InputError("labels file line " + std::to_string(lineno) + " is ragged");
        out.push_back(detail::parse_label(cells[static_cast<std::size_t>(col)], lineno));
    }
    return out;
}

inline void write_labels_csv(std::ostream& out, const Labels& labels) {
    out << "index,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

}  // namespace cnc

#endif  // CNC_DATASET_IO_HPP
