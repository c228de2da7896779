#include "klpriv/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "klpriv/errors.hpp"

namespace klpriv {

void Dataset::validate() const {
    if (features.rows() != labels.rows())
        throw DimensionError("dataset: feature and label row counts differ");
}

Dataset select_records(const Dataset& data, std::span<const std::size_t> indices) {
    Dataset out{Matrix(indices.size(), data.dim()), Matrix(indices.size(), data.outputs())};
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t i = indices[r];
        if (i >= data.size()) throw ValidationError("select_records: index out of range");
        std::copy_n(data.x(i).begin(), data.dim(), out.features.row(r).begin());
        std::copy_n(data.y(i).begin(), data.outputs(), out.labels.row(r).begin());
    }
    return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.dim() != b.dim() || a.outputs() != b.outputs())
        throw DimensionError("concat: datasets have different shapes");
    std::vector<double> x(a.features.entries().begin(), a.features.entries().end());
    x.insert(x.end(), b.features.entries().begin(), b.features.entries().end());
    std::vector<double> y(a.labels.entries().begin(), a.labels.entries().end());
    y.insert(y.end(), b.labels.entries().begin(), b.labels.entries().end());
    const std::size_t n = a.size() + b.size();
    return {Matrix(n, a.dim(), std::move(x)), Matrix(n, a.outputs(), std::move(y))};
}

Dataset synth_sphere(std::size_t n, std::size_t d, RngStream& rng, const LabelRule& rule) {
    if (n == 0 || d == 0) throw ValidationError("synth_sphere: n and d must be >= 1");
    Matrix x(n, d);
    const double radius = std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < n; ++i) {
        auto row = x.row(i);
        double norm2 = 0.0;
        do {
            for (double& v : row) v = rng.normal();
            norm2 = squared_norm(row);
        } while (norm2 == 0.0);
        const double scale = radius / std::sqrt(norm2);
        for (double& v : row) v *= scale;
    }

    Matrix y;
    if (const auto* teacher = std::get_if<LinearTeacher>(&rule)) {
        if (teacher->weights.size() != d) throw DimensionError("synth_sphere: teacher weight length != d");
        y = Matrix(n, 1);
        for (std::size_t i = 0; i < n; ++i) y(i, 0) = dot(teacher->weights, x.row(i)) >= 0.0 ? 1.0 : -1.0;
    } else if (const auto* cls = std::get_if<RandomClass>(&rule)) {
        if (cls->classes < 2) throw ValidationError("synth_sphere: need at least two classes");
        y = Matrix(n, cls->classes);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(rng.uniform() * static_cast<double>(cls->classes));
            y(i, std::min(c, cls->classes - 1)) = 1.0;
        }
    } else {
        y = Matrix(n, 1);
        for (std::size_t i = 0; i < n; ++i) y(i, 0) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    return {std::move(x), std::move(y)};
}

std::optional<NormalizeMode> parse_normalize_mode(std::string_view name) {
    if (name == "none") return NormalizeMode::None;
    if (name == "cap") return NormalizeMode::Cap;
    if (name == "exact") return NormalizeMode::Exact;
    return std::nullopt;
}

Matrix normalize_to_sqrt_d(const Matrix& x, NormalizeMode mode) {
    Matrix out = x;
    if (mode == NormalizeMode::None) return out;
    const double radius = std::sqrt(static_cast<double>(x.cols()));
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        const double norm = std::sqrt(squared_norm(row));
        if (mode == NormalizeMode::Exact) {
            if (norm == 0.0) throw ValidationError("normalize_to_sqrt_d: zero row in exact mode");
            // Leave rows that already sit on the sphere bit-identical.
            if (norm == radius) continue;
            for (double& v : row) v *= radius / norm;
        } else if (norm > radius) {
            for (double& v : row) v *= radius / norm;
        }
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        const auto first = cell.find_first_not_of(" \t\r");
        const auto last = cell.find_last_not_of(" \t\r");
        cells.push_back(first == std::string::npos ? std::string() : cell.substr(first, last - first + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_double(const std::string& cell, std::size_t line_no) {
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    if (!cell.empty() && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || cell.empty())
        throw ParseError("line " + std::to_string(line_no) + ": non-numeric cell '" + cell + "'");
    return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    if (schema.outputs == 0) throw ValidationError("load_csv: outputs must be >= 1");

    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        header = split_csv_line(line);
        break;
    }
    if (header.empty()) throw ParseError(path + ": missing header row");
    const auto label_it = std::find(header.begin(), header.end(), schema.label_column);
    if (label_it == header.end()) throw ParseError(path + ": no column named '" + schema.label_column + "'");
    const auto label_col = static_cast<std::size_t>(label_it - header.begin());
    const std::size_t d = header.size() - 1;
    if (d == 0) throw ParseError(path + ": no feature columns");

    std::vector<double> x;
    std::vector<double> y;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r" || line.front() == '#') continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const double v = parse_double(cells[c], line_no);
            if (c != label_col) {
                x.push_back(v);
                continue;
            }
            if (schema.outputs == 1) {
                if (v == 1.0) y.push_back(1.0);
                else if (v == -1.0 || v == 0.0) y.push_back(-1.0);
                else throw ParseError("line " + std::to_string(line_no) + ": unknown binary label " + cells[c]);
            } else {
                if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(schema.outputs))
                    throw ParseError("line " + std::to_string(line_no) + ": unknown class label " + cells[c]);
                std::vector<double> onehot(schema.outputs, 0.0);
                onehot[static_cast<std::size_t>(v)] = 1.0;
                y.insert(y.end(), onehot.begin(), onehot.end());
            }
        }
        ++n;
    }
    Matrix features(n, d, std::move(x));
    return {normalize_to_sqrt_d(features, schema.normalize), Matrix(n, schema.outputs, std::move(y))};
}

void write_csv(const std::string& path, const Dataset& data, const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
    out << label_column << '\n';
    char buf[64];
    auto put = [&](double v) {
        const auto res = std::to_chars(buf, buf + sizeof(buf), v);
        out.write(buf, res.ptr - buf);
    };
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.x(i)) {
            put(v);
            out << ',';
        }
        if (data.outputs() == 1) {
            put(data.y(i)[0]);
        } else {
            const auto y = data.y(i);
            put(static_cast<double>(std::max_element(y.begin(), y.end()) - y.begin()));
        }
        out << '\n';
    }
}

std::string to_string(NeighborNotion notion) {
    switch (notion) {
        case NeighborNotion::ReplaceOne: return "replace";
        case NeighborNotion::RemoveOne: return "remove";
        case NeighborNotion::AddOne: return "add";
    }
    return "unknown";
}

std::optional<NeighborNotion> parse_neighbor_notion(std::string_view name) {
    if (name == "replace") return NeighborNotion::ReplaceOne;
    if (name == "remove") return NeighborNotion::RemoveOne;
    if (name == "add") return NeighborNotion::AddOne;
    return std::nullopt;
}

NeighborSet enumerate_neighbors(const Dataset& data, NeighborNotion notion, const Dataset& pool,
                                std::size_t cap, RngStream& rng) {
    NeighborSet set{notion, pool, {}, false};
    const std::size_t n = data.size();
    switch (notion) {
        case NeighborNotion::RemoveOne:
            if (n < 2) throw ValidationError("remove-one neighbors need at least two records");
            for (std::size_t i = 0; i < n; ++i) set.pairs.push_back({i, std::nullopt});
            break;
        case NeighborNotion::AddOne:
            if (pool.empty()) throw ValidationError("add-one neighbors need a nonempty pool");
            for (std::size_t j = 0; j < pool.size(); ++j) set.pairs.push_back({std::nullopt, j});
            break;
        case NeighborNotion::ReplaceOne: {
            if (pool.empty()) throw ValidationError("replace-one neighbors need a nonempty pool");
            if (n == 0) throw ValidationError("replace-one neighbors need a nonempty dataset");
            const std::size_t total = n * pool.size();
            std::vector<std::size_t> flat(total);
            std::iota(flat.begin(), flat.end(), 0);
            if (cap > 0 && total > cap) {
                // Partial Fisher-Yates, then restore enumeration order.
                for (std::size_t k = 0; k < cap; ++k) {
                    const auto r = k + static_cast<std::size_t>(rng.uniform() * static_cast<double>(total - k));
                    std::swap(flat[k], flat[std::min(r, total - 1)]);
                }
                flat.resize(cap);
                std::sort(flat.begin(), flat.end());
                set.capped = true;
            }
            for (std::size_t f : flat) set.pairs.push_back({f / pool.size(), f % pool.size()});
            break;
        }
    }
    if (!pool.empty() && !data.empty() && (pool.dim() != data.dim() || pool.outputs() != data.outputs()))
        throw DimensionError("neighbor pool shape differs from dataset");
    return set;
}

NeighborSet enumerate_neighbors(const Dataset& data, NeighborNotion notion, const Dataset& pool) {
    RngStream unused(0, 0);
    return enumerate_neighbors(data, notion, pool, 0, unused);
}

HoldoutSplit holdout_split(const Dataset& data, std::size_t pool_size, RngStream& rng) {
    if (pool_size >= data.size()) throw ValidationError("holdout_split: pool must leave at least one record");
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t k = 0; k < pool_size; ++k) {
        const auto r = k + static_cast<std::size_t>(rng.uniform() * static_cast<double>(idx.size() - k));
        std::swap(idx[k], idx[std::min(r, idx.size() - 1)]);
    }
    std::vector<std::size_t> pool_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(pool_size));
    std::vector<std::size_t> train_idx(idx.begin() + static_cast<std::ptrdiff_t>(pool_size), idx.end());
    std::sort(pool_idx.begin(), pool_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    return {select_records(data, train_idx), select_records(data, pool_idx)};
}

}  // namespace klpriv
