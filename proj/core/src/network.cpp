#include "klpriv/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "klpriv/data.hpp"
#include "klpriv/errors.hpp"

namespace klpriv {

NetArch NetArch::uniform(std::size_t input_dim, std::size_t width, std::size_t depth,
                         std::size_t output_dim) {
    if (depth < 2) throw ValidationError("network depth must be at least 2");
    NetArch a{input_dim, output_dim, std::vector<std::size_t>(depth - 1, width)};
    a.validate();
    return a;
}

std::size_t NetArch::width(std::size_t l) const {
    if (l == 0) return input_dim;
    if (l == depth()) return output_dim;
    if (l > depth()) throw ValidationError("layer index out of range");
    return hidden[l - 1];
}

std::size_t NetArch::param_count() const {
    std::size_t p = 0;
    for (std::size_t l = 1; l <= depth(); ++l) p += width(l) * width(l - 1);
    return p;
}

std::size_t NetArch::layer_offset(std::size_t k) const {
    std::size_t off = 0;
    for (std::size_t l = 1; l <= k; ++l) off += width(l) * width(l - 1);
    return off;
}

void NetArch::validate() const {
    if (hidden.empty()) throw ValidationError("network depth must be at least 2");
    if (input_dim == 0 || output_dim == 0) throw ValidationError("input and output widths must be >= 1");
    for (std::size_t m : hidden)
        if (m == 0) throw ValidationError("hidden widths must be >= 1");
}

std::string InitScheme::name() const {
    switch (kind) {
        case SchemeKind::LeCun: return "lecun";
        case SchemeKind::He: return "he";
        case SchemeKind::Ntk: return "ntk";
        case SchemeKind::Xavier: return "xavier";
        case SchemeKind::Custom: return "custom";
    }
    return "unknown";
}

std::optional<InitScheme> parse_scheme(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const InitScheme& s : standard_schemes())
        if (s.name() == lower) return s;
    return std::nullopt;
}

std::vector<InitScheme> standard_schemes() {
    return {InitScheme::lecun(), InitScheme::he(), InitScheme::ntk(), InitScheme::xavier()};
}

std::vector<double> init_betas(const InitScheme& scheme, const NetArch& arch) {
    arch.validate();
    const std::size_t depth = arch.depth();
    std::vector<double> betas(depth);
    for (std::size_t l = 1; l <= depth; ++l) {
        const double fan_in = static_cast<double>(arch.width(l - 1));
        const double fan_out = static_cast<double>(arch.width(l));
        double& b = betas[l - 1];
        switch (scheme.kind) {
            case SchemeKind::LeCun: b = 1.0 / fan_in; break;
            case SchemeKind::He: b = 2.0 / fan_in; break;
            case SchemeKind::Ntk: b = l < depth ? 2.0 / fan_out : 1.0 / fan_out; break;
            case SchemeKind::Xavier: b = 2.0 / (fan_in + fan_out); break;
            case SchemeKind::Custom:
                if (scheme.custom_betas.size() != depth)
                    throw DimensionError("custom scheme needs one variance per layer");
                b = scheme.custom_betas[l - 1];
                if (!(b >= 0.0)) throw ValidationError("custom variances must be >= 0");
                break;
        }
    }
    return betas;
}

ParamVector::ParamVector(NetArch arch) : arch_(std::move(arch)), flat_(arch_.param_count(), 0.0) {}

ParamVector::ParamVector(NetArch arch, std::vector<double> flat)
    : arch_(std::move(arch)), flat_(std::move(flat)) {
    if (flat_.size() != arch_.param_count())
        throw DimensionError("parameter vector length does not match architecture");
}

LayerView ParamVector::layer(std::size_t k) const {
    const std::size_t rows = arch_.width(k + 1), cols = arch_.width(k);
    return {std::span<const double>(flat_).subspan(arch_.layer_offset(k), rows * cols), rows, cols};
}

std::span<double> ParamVector::layer_mut(std::size_t k) {
    const std::size_t rows = arch_.width(k + 1), cols = arch_.width(k);
    return std::span<double>(flat_).subspan(arch_.layer_offset(k), rows * cols);
}

ParamVector sample_init(const NetArch& arch, std::span<const double> betas, RngStream& rng) {
    arch.validate();
    if (betas.size() != arch.depth()) throw DimensionError("sample_init: need one variance per layer");
    ParamVector w(arch);
    for (std::size_t k = 0; k < arch.depth(); ++k) {
        if (!(betas[k] >= 0.0)) throw ValidationError("sample_init: variances must be >= 0");
        const double sd = std::sqrt(betas[k]);
        for (double& v : w.layer_mut(k)) v = sd * rng.normal();
    }
    return w;
}

std::string to_string(LossKind kind) {
    return kind == LossKind::LogisticSingle ? "logistic" : "cross_entropy";
}

LossKind default_loss(std::size_t output_dim) {
    return output_dim == 1 ? LossKind::LogisticSingle : LossKind::CrossEntropyMulti;
}

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

Vector softmax(std::span<const double> f) {
    const double top = *std::max_element(f.begin(), f.end());
    Vector p(f.size());
    double z = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) z += (p[j] = std::exp(f[j] - top));
    for (double& v : p) v /= z;
    return p;
}

}  // namespace

void validate_label(LossKind kind, std::span<const double> label, std::size_t output_dim) {
    if (kind == LossKind::LogisticSingle) {
        if (output_dim != 1) throw ValidationError("logistic loss requires a single output");
        if (label.size() != 1 || (label[0] != 1.0 && label[0] != -1.0))
            throw ValidationError("logistic loss requires a label in {-1, +1}");
        return;
    }
    if (output_dim < 2) throw ValidationError("cross-entropy loss requires at least two outputs");
    if (label.size() != output_dim) throw ValidationError("one-hot label length differs from output width");
    double total = 0.0;
    for (double v : label) {
        if (v != 0.0 && v != 1.0) throw ValidationError("cross-entropy labels must be one-hot");
        total += v;
    }
    if (total != 1.0) throw ValidationError("cross-entropy labels must be one-hot");
}

double loss_value(LossKind kind, std::span<const double> output, std::span<const double> label) {
    if (kind == LossKind::LogisticSingle) return softplus(-label[0] * output[0]);
    const double top = *std::max_element(output.begin(), output.end());
    double z = 0.0;
    for (double f : output) z += std::exp(f - top);
    return top + std::log(z) - dot(label, output);
}

Vector loss_derivative(LossKind kind, std::span<const double> output, std::span<const double> label) {
    if (kind == LossKind::LogisticSingle) return {-label[0] * sigmoid(-label[0] * output[0])};
    Vector r = softmax(output);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= label[j];
    return r;
}

double ForwardPass::min_abs_preactivation() const {
    double m = std::numeric_limits<double>::infinity();
    for (const Vector& z : preactivations)
        for (double v : z) m = std::min(m, std::abs(v));
    return m;
}

ForwardPass forward(const ParamVector& params, std::span<const double> x) {
    const NetArch& arch = params.arch();
    if (x.size() != arch.input_dim) throw DimensionError("forward: input dimension mismatch");
    const std::size_t depth = arch.depth();
    ForwardPass pass;
    pass.activations.reserve(depth);
    pass.preactivations.reserve(depth - 1);
    pass.activations.emplace_back(x.begin(), x.end());
    for (std::size_t k = 0; k < depth; ++k) {
        const LayerView w = params.layer(k);
        const Vector& h = pass.activations.back();
        Vector z(w.rows);
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double* wr = w.data.data() + i * w.cols;
            double s = 0.0;
            for (std::size_t j = 0; j < w.cols; ++j) s += wr[j] * h[j];
            z[i] = s;
        }
        if (k + 1 == depth) {
            pass.output = std::move(z);
        } else {
            Vector a(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
            pass.preactivations.push_back(std::move(z));
            pass.activations.push_back(std::move(a));
        }
    }
    for (double v : pass.output)
        if (!std::isfinite(v)) throw NonFiniteError("forward: non-finite network output");
    return pass;
}

void backward(const ParamVector& params, const ForwardPass& pass, std::span<const double> seed,
              std::span<double> out) {
    const NetArch& arch = params.arch();
    if (seed.size() != arch.output_dim) throw DimensionError("backward: seed length mismatch");
    if (out.size() != arch.param_count()) throw DimensionError("backward: output buffer length mismatch");
    Vector delta(seed.begin(), seed.end());
    Vector prev;
    for (std::size_t k = arch.depth(); k-- > 0;) {
        const LayerView w = params.layer(k);
        const Vector& h = pass.activations[k];
        double* g = out.data() + arch.layer_offset(k);
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double di = delta[i];
            double* gr = g + i * w.cols;
            for (std::size_t j = 0; j < w.cols; ++j) gr[j] = di * h[j];
        }
        if (k == 0) break;
        prev.assign(w.cols, 0.0);
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double di = delta[i];
            if (di == 0.0) continue;
            const double* wr = w.data.data() + i * w.cols;
            for (std::size_t j = 0; j < w.cols; ++j) prev[j] += wr[j] * di;
        }
        const Vector& z = pass.preactivations[k - 1];
        for (std::size_t j = 0; j < prev.size(); ++j)
            if (!(z[j] > 0.0)) prev[j] = 0.0;
        delta.swap(prev);
    }
}

Vector per_example_grad(const ParamVector& params, std::span<const double> x,
                        std::span<const double> label, LossKind loss) {
    validate_label(loss, label, params.arch().output_dim);
    const ForwardPass pass = forward(params, x);
    const Vector seed = loss_derivative(loss, pass.output, label);
    Vector g(params.size());
    backward(params, pass, seed, g);
    return g;
}

Matrix output_jacobian(const ParamVector& params, std::span<const double> x) {
    const ForwardPass pass = forward(params, x);
    const std::size_t o = params.arch().output_dim;
    Matrix jac(o, params.size());
    Vector unit(o, 0.0);
    for (std::size_t j = 0; j < o; ++j) {
        unit[j] = 1.0;
        backward(params, pass, unit, jac.row(j));
        unit[j] = 0.0;
    }
    return jac;
}

Vector empirical_grad(const ParamVector& params, const Dataset& data, LossKind loss) {
    if (data.empty()) throw EmptyInputError("empirical_grad: empty dataset");
    Vector total(params.size(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i)
        axpy(1.0, per_example_grad(params, data.x(i), data.y(i), loss), total);
    const double inv_n = 1.0 / static_cast<double>(data.size());
    for (double& v : total) v *= inv_n;
    return total;
}

double empirical_loss(const ParamVector& params, const Dataset& data, LossKind loss) {
    if (data.empty()) throw EmptyInputError("empirical_loss: empty dataset");
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        total += loss_value(loss, forward(params, data.x(i)).output, data.y(i));
    return total / static_cast<double>(data.size());
}

}  // namespace klpriv
