#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "klpriv/numerics.hpp"
#include "klpriv/rng.hpp"

namespace klpriv {

/// Features X (n × d) and targets Y (n × o). Single-output targets are ±1;
/// multi-output targets are one-hot rows.
struct Dataset {
    Matrix features;
    Matrix labels;

    std::size_t size() const noexcept { return features.rows(); }
    std::size_t dim() const noexcept { return features.cols(); }
    std::size_t outputs() const noexcept { return labels.cols(); }
    bool empty() const noexcept { return size() == 0; }

    std::span<const double> x(std::size_t i) const { return features.row(i); }
    std::span<const double> y(std::size_t i) const { return labels.row(i); }

    /// Throws DimensionError if X and Y disagree on n.
    void validate() const;
};

/// Records `indices` of `data`, in the given order.
Dataset select_records(const Dataset& data, std::span<const std::size_t> indices);
/// Concatenate two datasets with matching shapes.
Dataset concat(const Dataset& a, const Dataset& b);

struct RandomSign {};
struct LinearTeacher {
    Vector weights;  // label = sign(⟨w, x⟩), ties -> +1
};
struct RandomClass {
    std::size_t classes = 2;  // one-hot targets
};
using LabelRule = std::variant<RandomSign, LinearTeacher, RandomClass>;

/// n i.i.d. Gaussian directions rescaled to norm √d.
Dataset synth_sphere(std::size_t n, std::size_t d, RngStream& rng, const LabelRule& rule);

enum class NormalizeMode {
    None,
    Cap,    // rows with norm > √d shrink to √d
    Exact,  // every row rescaled to norm √d
};

std::optional<NormalizeMode> parse_normalize_mode(std::string_view name);
Matrix normalize_to_sqrt_d(const Matrix& x, NormalizeMode mode);

struct CsvSchema {
    std::string label_column = "label";
    NormalizeMode normalize = NormalizeMode::Cap;
    /// 1: labels in {−1, 1} or {0, 1}, stored as ±1. o ≥ 2: integer class ids in [0, o).
    std::size_t outputs = 1;
};

/// Header row required; every other column is a feature.
Dataset load_csv(const std::string& path, const CsvSchema& schema);
/// Writes features plus a label column; values round-trip exactly.
void write_csv(const std::string& path, const Dataset& data, const std::string& label_column = "label");

enum class NeighborNotion { ReplaceOne, RemoveOne, AddOne };

std::string to_string(NeighborNotion notion);
/// "replace" | "remove" | "add"
std::optional<NeighborNotion> parse_neighbor_notion(std::string_view name);

/// One neighboring dataset D′, described by what changes in D.
struct NeighborPair {
    std::optional<std::size_t> removed;   // index into D
    std::optional<std::size_t> inserted;  // index into the pool
};

struct NeighborSet {
    NeighborNotion notion = NeighborNotion::RemoveOne;
    Dataset pool;
    std::vector<NeighborPair> pairs;
    /// True if ReplaceOne pairs were subsampled down to the cap.
    bool capped = false;
};

inline constexpr std::size_t kDefaultNeighborCap = 256;

/// RemoveOne: n neighbors; AddOne: |pool|; ReplaceOne: n·|pool|, subsampled
/// with `rng` down to `cap` pairs when larger.
NeighborSet enumerate_neighbors(const Dataset& data, NeighborNotion notion, const Dataset& pool,
                                std::size_t cap, RngStream& rng);
NeighborSet enumerate_neighbors(const Dataset& data, NeighborNotion notion, const Dataset& pool = {});

struct HoldoutSplit {
    Dataset train;
    Dataset pool;
};

/// Moves `pool_size` randomly chosen records into a held-out pool.
HoldoutSplit holdout_split(const Dataset& data, std::size_t pool_size, RngStream& rng);

}  // namespace klpriv
