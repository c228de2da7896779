#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "klpriv/numerics.hpp"
#include "klpriv/rng.hpp"

namespace klpriv {

/// Layer widths of a bias-free fully connected ReLU network.
///
/// m₀ = input_dim, m₁..m_{L−1} = hidden, m_L = output_dim. Weight layer k
/// (0-based) maps width(k) -> width(k + 1), i.e. it is W_{k+1}.
struct NetArch {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::vector<std::size_t> hidden;

    /// m₁ = … = m_{L−1} = width.
    static NetArch uniform(std::size_t input_dim, std::size_t width, std::size_t depth,
                           std::size_t output_dim);

    std::size_t depth() const noexcept { return hidden.size() + 1; }
    /// m_l for l in [0, depth()].
    std::size_t width(std::size_t l) const;
    std::size_t param_count() const;
    /// Offset of weight layer k in the flattened parameter vector.
    std::size_t layer_offset(std::size_t k) const;

    /// Throws ValidationError unless depth ≥ 2 and every width ≥ 1.
    void validate() const;

    friend bool operator==(const NetArch&, const NetArch&) = default;
};

enum class SchemeKind { LeCun, He, Ntk, Xavier, Custom };

struct InitScheme {
    SchemeKind kind = SchemeKind::LeCun;
    std::vector<double> custom_betas;  // only for Custom

    static InitScheme lecun() { return {SchemeKind::LeCun, {}}; }
    static InitScheme he() { return {SchemeKind::He, {}}; }
    static InitScheme ntk() { return {SchemeKind::Ntk, {}}; }
    static InitScheme xavier() { return {SchemeKind::Xavier, {}}; }
    static InitScheme custom(std::vector<double> betas) { return {SchemeKind::Custom, std::move(betas)}; }

    std::string name() const;
};

/// "lecun", "he", "ntk", "xavier" (case-insensitive).
std::optional<InitScheme> parse_scheme(std::string_view name);
/// The four named schemes in table order.
std::vector<InitScheme> standard_schemes();

/// Per-layer Gaussian variances β₁..β_L.
std::vector<double> init_betas(const InitScheme& scheme, const NetArch& arch);

/// Read-only view of one weight matrix inside a flat parameter vector.
struct LayerView {
    std::span<const double> data;
    std::size_t rows = 0;
    std::size_t cols = 0;

    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return data.subspan(r * cols, cols); }
};

/// Flattened weights (Vec(W₁), …, Vec(W_L)), each W_l row-major m_l × m_{l−1}.
class ParamVector {
public:
    explicit ParamVector(NetArch arch);
    ParamVector(NetArch arch, std::vector<double> flat);

    const NetArch& arch() const noexcept { return arch_; }
    std::size_t size() const noexcept { return flat_.size(); }
    std::span<const double> flat() const noexcept { return flat_; }
    std::span<double> flat() noexcept { return flat_; }

    LayerView layer(std::size_t k) const;
    std::span<double> layer_mut(std::size_t k);

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    NetArch arch_;
    std::vector<double> flat_;
};

/// Each W_{k+1} gets i.i.d. N(0, betas[k]) entries.
ParamVector sample_init(const NetArch& arch, std::span<const double> betas, RngStream& rng);

enum class LossKind {
    CrossEntropyMulti,  // softmax cross-entropy, one-hot targets, o ≥ 2
    LogisticSingle,     // log(1 + exp(−y·f)), y ∈ {−1, +1}, o = 1
};

std::string to_string(LossKind kind);
/// The loss implied by the output dimension.
LossKind default_loss(std::size_t output_dim);

/// Throws ValidationError if `label` is not a valid target for `kind` with o outputs.
void validate_label(LossKind kind, std::span<const double> label, std::size_t output_dim);
double loss_value(LossKind kind, std::span<const double> output, std::span<const double> label);
/// ∂ℓ/∂f: −y·sigmoid(−y·f) for logistic, softmax(f) − y for cross-entropy.
Vector loss_derivative(LossKind kind, std::span<const double> output, std::span<const double> label);

struct ForwardPass {
    Vector output;
    /// h₀ = x, h₁, …, h_{L−1}
    std::vector<Vector> activations;
    /// W_l·h_{l−1} for l = 1..L−1 (the ReLU inputs)
    std::vector<Vector> preactivations;

    double min_abs_preactivation() const;
};

ForwardPass forward(const ParamVector& params, std::span<const double> x);

/// Vector-Jacobian product (∂f/∂W)ᵀ·seed written into out (length P).
/// ReLU'(0) is taken as 0.
void backward(const ParamVector& params, const ForwardPass& pass, std::span<const double> seed,
              std::span<double> out);

/// ∇_W ℓ(f_W(x); y)
Vector per_example_grad(const ParamVector& params, std::span<const double> x,
                        std::span<const double> label, LossKind loss);

/// o × P matrix; row j is ∂f_j/∂W in parameter order.
Matrix output_jacobian(const ParamVector& params, std::span<const double> x);

struct Dataset;

/// (1/n)·Σ per_example_grad over the records of `data`.
Vector empirical_grad(const ParamVector& params, const Dataset& data, LossKind loss);
double empirical_loss(const ParamVector& params, const Dataset& data, LossKind loss);

}  // namespace klpriv
