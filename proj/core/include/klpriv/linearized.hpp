#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "klpriv/data.hpp"
#include "klpriv/network.hpp"
#include "klpriv/numerics.hpp"

namespace klpriv {

/// First-order Taylor expansion of the network around W0, evaluated on a
/// fixed set of inputs.
struct NtkFeatures {
    ParamVector w0;
    /// n × o outputs f_{W0}(xᵢ)
    Matrix f0;
    /// (n·o) × P, example-major: row i·o + j is ∂f_j(xᵢ)/∂W at W0
    Matrix jacobian;

    std::size_t examples() const noexcept { return f0.rows(); }
    std::size_t outputs() const noexcept { return f0.cols(); }
    const NetArch& arch() const noexcept { return w0.arch(); }
};

NtkFeatures build_features(const ParamVector& w0, const Matrix& inputs);
NtkFeatures build_features(const ParamVector& w0, const Dataset& data);

/// f0 + M₀·(W − W0), as an n × o matrix.
Matrix lin_forward(const NtkFeatures& features, const ParamVector& w);

/// Per-example gradient jacᵢᵀ·∂ℓ/∂f of the linearized model at W.
Vector lin_per_example_grad(const NtkFeatures& features, std::size_t example, const ParamVector& w,
                            std::span<const double> label, LossKind loss);

/// (1/n)·Σᵢ jacᵢᵀ·residualᵢ with residuals taken at the linearized predictions.
Vector lin_empirical_grad(const NtkFeatures& features, const ParamVector& w, const Matrix& labels,
                          LossKind loss);
double lin_empirical_loss(const NtkFeatures& features, const ParamVector& w, const Matrix& labels,
                          LossKind loss);

struct GramAnalysis {
    Matrix gram;  // K = M₀M₀ᵀ
    double lambda0 = 0.0;
    std::size_t rank = 0;
};

/// Single-output only.
GramAnalysis gram_analysis(const NtkFeatures& features, double tol = kDefaultRankTolerance);

struct LazySolution {
    ParamVector w_star;
    Vector dual;                 // α with W* − W0 = M₀ᵀα
    double distance_sq = 0.0;    // R = αᵀKα
    double achieved_loss = 0.0;  // logistic empirical loss at W*
    double alpha_gap = 0.0;      // upper bound on loss(W*) − inf loss
    double ridge = 0.0;
};

/// Default ridge 1e-10 · trace(K) / n.
double default_lazy_ridge(const Matrix& gram);

/// Interpolates the targets 2·ln(n)·yᵢ in the span of the Jacobian rows,
/// solving in the n-dimensional dual. Single output, labels ±1.
/// Passing no ridge uses default_lazy_ridge; pass 0 for an exact solve.
LazySolution lazy_solution(const NtkFeatures& features, std::span<const double> labels,
                           std::optional<double> ridge = std::nullopt);

/// Arithmetic mean of the iterates.
ParamVector running_average(std::span<const ParamVector> iterates);

/// Streaming form of running_average.
class IterateAverage {
public:
    explicit IterateAverage(const NetArch& arch);
    void add(const ParamVector& w);
    std::size_t count() const noexcept { return count_; }
    ParamVector mean() const;

private:
    NetArch arch_;
    Vector sum_;
    std::size_t count_ = 0;
};

}  // namespace klpriv
