#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "klpriv/network.hpp"

namespace klpriv {

/// How a squared drift difference turns into KL.
///
/// PaperHalfSigma2 divides by 2σ², matching the continuous-time composition
/// and the noisy-GD recursion as usually stated. ExactGaussianQuarterSigma2
/// divides by 4σ²: the exact KL between N(μ, 2ησ²I) and N(μ′, 2ησ²I) is
/// ‖μ − μ′‖²/(4ησ²).
enum class KlConvention { PaperHalfSigma2, ExactGaussianQuarterSigma2 };

std::string to_string(KlConvention c);
/// "paper" | "exact"
std::optional<KlConvention> parse_kl_convention(std::string_view name);
/// 2σ² or 4σ².
double kl_denominator(double sigma2, KlConvention c);
/// η·‖Δg‖² / (2σ²) or / (4σ²).
double kl_step_contribution(double eta, double sq_diff, double sigma2, KlConvention c);

/// B = d·o·∏_{i<L}(βᵢmᵢ/2)·Σ_l β_L/β_l
double gradient_norm_constant_B(const NetArch& arch, std::span<const double> betas);

/// The per-scheme closed form of B from the summary table (uniform width m).
double table_closed_form_B(SchemeKind scheme, std::size_t d, std::size_t m, std::size_t depth,
                           std::size_t o);

/// E‖∂f(x)/∂W‖²_F at random init = ‖x‖²·o·∏_{i<L}(βᵢmᵢ/2)·Σ_l β_L/β_l
double expected_grad_norm_init(const NetArch& arch, std::span<const double> betas, double x_sqnorm);

/// E‖f(x)‖² at random init = o·β_L·∏_{i<L}(βᵢmᵢ/2)·‖x‖²
double expected_output_sqnorm_init(const NetArch& arch, std::span<const double> betas, double x_sqnorm);

/// 2·B·T / (n²·σ²)
double kl_bound_linearized(double b, double t, double n, double sigma2);

/// Inputs of the drift-difference bound for training the full network.
struct DnnBoundInputs {
    double t = 0.0;
    double n = 1.0;
    double sigma2 = 0.0;
    double c = 0.0;
    double beta_smooth = 0.0;
    double rank_mt = 0.0;
    double e_delta0 = 0.0;  // E‖∇L(W0; D) − ∇L(W0; D′)‖²
    double e_grad0 = 0.0;   // E‖∇L(W0; D)‖²
    /// Free-form note on where the two expectations came from.
    std::string provenance = "user";
};

struct BoundTerms {
    double init_difference = 0.0;  // 2T·E_delta0
    double fluctuation = 0.0;      // exponential-in-T term
    double non_smoothness = 0.0;   // 2c²T/n²
};

struct BoundReport {
    double value = 0.0;     // KL bound
    double integral = 0.0;  // sum of the three terms
    BoundTerms terms;
    KlConvention convention = KlConvention::PaperHalfSigma2;
    /// (2 + β²)·T exceeded the overflow guard; value and integral are +∞.
    bool exponential_regime = false;
    std::string provenance;
};

inline constexpr double kExponentOverflowGuard = 700.0;

BoundReport dnn_drift_bound(const DnnBoundInputs& in,
                            KlConvention convention = KlConvention::PaperHalfSigma2);

struct LazyRBound {
    double value = 0.0;
    /// Log factors are dropped; only the order of magnitude is meaningful.
    bool order_of_magnitude = true;
};

/// max{1/(d·β_L·∏_{i<L}βᵢmᵢ), 1} · n / Σ_l β_l⁻¹
LazyRBound lazy_R_bound(const NetArch& arch, std::span<const double> betas, double n);

struct TradeoffSchedule {
    double sigma2 = 0.0;
    double t = 0.0;
    double risk_bound = 0.0;
    double distance_term = 0.0;  // R/(2T)
    double privacy_term = 0.0;   // B·T/(ε·n)
};

/// T = √(εnR/(2B)), σ² = 2BT/(εn²), risk = 1/n² + √(2BR/(εn)).
TradeoffSchedule tradeoff_schedule(double b, double r, double eps, double n);

/// (0, δ)-DP from ε-KL via Pinsker: δ = √(ε/2).
double kl_to_dp_delta(double eps_kl);

}  // namespace klpriv
