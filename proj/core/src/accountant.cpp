#include "klpriv/accountant.hpp"

#include <cmath>
#include <limits>

#include "klpriv/errors.hpp"

namespace klpriv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonneg(double v, const char* what) {
    if (!(v >= 0.0)) throw ValidationError(std::string(what) + " must be finite and >= 0");
}

void require_betas(const NetArch& arch, std::span<const double> betas) {
    arch.validate();
    if (betas.size() != arch.depth()) throw DimensionError("need one variance per layer");
    for (double b : betas) require_nonneg(b, "layer variance");
}

// ∏_{i=1}^{L−1} βᵢmᵢ/2
double hidden_gain(const NetArch& arch, std::span<const double> betas) {
    double p = 1.0;
    for (std::size_t i = 1; i < arch.depth(); ++i) p *= betas[i - 1] * static_cast<double>(arch.width(i)) / 2.0;
    return p;
}

// ∏_{i<L}(βᵢmᵢ/2) · Σ_l β_L/β_l. When some β_l is zero the sum is expanded
// term by term so that no division by zero occurs.
double gain_times_ratio_sum(const NetArch& arch, std::span<const double> betas) {
    const std::size_t depth = arch.depth();
    const double beta_last = betas[depth - 1];
    bool any_zero = false;
    for (double b : betas) any_zero = any_zero || b == 0.0;
    if (!any_zero) {
        double ratio_sum = 0.0;
        for (double b : betas) ratio_sum += beta_last / b;
        return hidden_gain(arch, betas) * ratio_sum;
    }
    double total = 0.0;
    for (std::size_t l = 1; l <= depth; ++l) {
        double term = l < depth ? beta_last * static_cast<double>(arch.width(l)) / 2.0 : 1.0;
        for (std::size_t i = 1; i < depth; ++i)
            if (i != l) term *= betas[i - 1] * static_cast<double>(arch.width(i)) / 2.0;
        total += term;
    }
    return total;
}

// expm1(x) − x without cancellation for small x.
double expm1_minus_x(double x) {
    if (std::abs(x) < 1e-3) {
        const double x2 = x * x;
        return x2 / 2.0 + x2 * x / 6.0 + x2 * x2 / 24.0 + x2 * x2 * x / 120.0;
    }
    return std::expm1(x) - x;
}

}  // namespace

std::string to_string(KlConvention c) {
    return c == KlConvention::PaperHalfSigma2 ? "paper" : "exact";
}

std::optional<KlConvention> parse_kl_convention(std::string_view name) {
    if (name == "paper") return KlConvention::PaperHalfSigma2;
    if (name == "exact") return KlConvention::ExactGaussianQuarterSigma2;
    return std::nullopt;
}

double kl_denominator(double sigma2, KlConvention c) {
    return (c == KlConvention::PaperHalfSigma2 ? 2.0 : 4.0) * sigma2;
}

double kl_step_contribution(double eta, double sq_diff, double sigma2, KlConvention c) {
    return eta * sq_diff / kl_denominator(sigma2, c);
}

double gradient_norm_constant_B(const NetArch& arch, std::span<const double> betas) {
    require_betas(arch, betas);
    for (double b : betas)
        if (b == 0.0) throw ValidationError("gradient_norm_constant_B: variances must be positive");
    return static_cast<double>(arch.input_dim) * static_cast<double>(arch.output_dim) *
           gain_times_ratio_sum(arch, betas);
}

double table_closed_form_B(SchemeKind scheme, std::size_t d_in, std::size_t m_in, std::size_t depth,
                           std::size_t o_in) {
    if (depth < 2) throw ValidationError("table_closed_form_B: depth must be >= 2");
    const double d = static_cast<double>(d_in), m = static_cast<double>(m_in);
    const double o = static_cast<double>(o_in), l = static_cast<double>(depth);
    switch (scheme) {
        case SchemeKind::LeCun: return o * m * (l - 1.0 + d / m) / std::pow(2.0, l - 1.0);
        case SchemeKind::He: return o * m * (l - 1.0 + d / m);
        case SchemeKind::Ntk: return d * m * ((l - 1.0) / 2.0 + o / m);
        case SchemeKind::Xavier:
            return o * d * (l - 1.0 + (d + o) / (2.0 * m)) /
                   (std::pow(2.0, l - 3.0) * (1.0 + d / m) * (1.0 + o / m));
        case SchemeKind::Custom: break;
    }
    throw ValidationError("table_closed_form_B: no closed form for custom schemes");
}

double expected_grad_norm_init(const NetArch& arch, std::span<const double> betas, double x_sqnorm) {
    require_betas(arch, betas);
    require_nonneg(x_sqnorm, "x_sqnorm");
    return x_sqnorm * static_cast<double>(arch.output_dim) * gain_times_ratio_sum(arch, betas);
}

double expected_output_sqnorm_init(const NetArch& arch, std::span<const double> betas, double x_sqnorm) {
    require_betas(arch, betas);
    require_nonneg(x_sqnorm, "x_sqnorm");
    return static_cast<double>(arch.output_dim) * betas[arch.depth() - 1] * hidden_gain(arch, betas) * x_sqnorm;
}

double kl_bound_linearized(double b, double t, double n, double sigma2) {
    require_nonneg(b, "B");
    require_nonneg(t, "T");
    require_nonneg(n, "n");
    if (!(sigma2 > 0.0)) throw ValidationError("kl_bound_linearized: sigma2 must be > 0");
    if (n == 0.0) throw ValidationError("kl_bound_linearized: n must be > 0");
    return 2.0 * b * t / (n * n * sigma2);
}

BoundReport dnn_drift_bound(const DnnBoundInputs& in, KlConvention convention) {
    require_nonneg(in.t, "T");
    require_nonneg(in.sigma2, "sigma2");
    require_nonneg(in.c, "c");
    require_nonneg(in.beta_smooth, "beta");
    require_nonneg(in.rank_mt, "rank(M_T)");
    require_nonneg(in.e_delta0, "E_delta0");
    require_nonneg(in.e_grad0, "E_grad0");
    if (!(in.n >= 1.0)) throw ValidationError("dnn_drift_bound: n must be >= 1");

    BoundReport r;
    r.convention = convention;
    r.provenance = in.provenance;
    const double n2 = in.n * in.n;
    const double b2 = in.beta_smooth * in.beta_smooth;
    const double rate = 2.0 + b2;

    r.terms.init_difference = 2.0 * in.t * in.e_delta0;
    r.terms.non_smoothness = 2.0 * in.c * in.c * in.t / n2;

    const double coeff = 2.0 * b2 / (n2 * rate);
    const double scale = in.e_grad0 + 2.0 * in.sigma2 * in.rank_mt + in.c * in.c;
    if (coeff > 0.0 && scale > 0.0 && rate * in.t > kExponentOverflowGuard) {
        r.exponential_regime = true;
        r.terms.fluctuation = kInf;
        r.integral = kInf;
        r.value = kInf;
        return r;
    }
    r.terms.fluctuation = coeff == 0.0 || scale == 0.0 ? 0.0 : coeff * (expm1_minus_x(rate * in.t) / rate) * scale;
    r.integral = r.terms.init_difference + r.terms.fluctuation + r.terms.non_smoothness;
    if (in.sigma2 == 0.0) {
        r.value = r.integral == 0.0 ? 0.0 : kInf;
    } else {
        r.value = r.integral / kl_denominator(in.sigma2, convention);
    }
    return r;
}

LazyRBound lazy_R_bound(const NetArch& arch, std::span<const double> betas, double n) {
    require_betas(arch, betas);
    require_nonneg(n, "n");
    if (arch.output_dim != 1) throw ValidationError("lazy_R_bound: single-output networks only");
    double prod = static_cast<double>(arch.input_dim) * betas[arch.depth() - 1];
    for (std::size_t i = 1; i < arch.depth(); ++i) prod *= betas[i - 1] * static_cast<double>(arch.width(i));
    double inv_sum = 0.0;
    for (double b : betas) {
        if (b == 0.0) throw ValidationError("lazy_R_bound: variances must be positive");
        inv_sum += 1.0 / b;
    }
    return {std::max(1.0 / prod, 1.0) * n / inv_sum, true};
}

TradeoffSchedule tradeoff_schedule(double b, double r, double eps, double n) {
    if (!(b > 0.0) || !(r > 0.0) || !(eps > 0.0) || !(n > 0.0))
        throw ValidationError("tradeoff_schedule: B, R, eps and n must be positive");
    TradeoffSchedule s;
    s.t = std::sqrt(eps * n * r / (2.0 * b));
    s.sigma2 = 2.0 * b * s.t / (eps * n * n);
    s.distance_term = r / (2.0 * s.t);
    s.privacy_term = b * s.t / (eps * n);
    s.risk_bound = 1.0 / (n * n) + std::sqrt(2.0 * b * r / (eps * n));
    return s;
}

double kl_to_dp_delta(double eps_kl) {
    if (!(eps_kl >= 0.0)) throw ValidationError("kl_to_dp_delta: KL budget must be >= 0");
    return std::sqrt(eps_kl / 2.0);
}

}  // namespace klpriv
