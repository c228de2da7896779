#include "klpriv/linearized.hpp"

#include <cmath>

#include "klpriv/errors.hpp"

namespace klpriv {

NtkFeatures build_features(const ParamVector& w0, const Matrix& inputs) {
    const NetArch& arch = w0.arch();
    if (inputs.cols() != arch.input_dim) throw DimensionError("build_features: input dimension mismatch");
    const std::size_t n = inputs.rows(), o = arch.output_dim;
    NtkFeatures feat{w0, Matrix(n, o), Matrix(n * o, w0.size())};
    Vector unit(o, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const ForwardPass pass = forward(w0, inputs.row(i));
        for (std::size_t j = 0; j < o; ++j) {
            feat.f0(i, j) = pass.output[j];
            unit[j] = 1.0;
            backward(w0, pass, unit, feat.jacobian.row(i * o + j));
            unit[j] = 0.0;
        }
    }
    return feat;
}

NtkFeatures build_features(const ParamVector& w0, const Dataset& data) {
    return build_features(w0, data.features);
}

namespace {

void require_same_arch(const NtkFeatures& f, const ParamVector& w) {
    if (!(f.arch() == w.arch())) throw DimensionError("linearized model: architecture mismatch");
}

Vector displacement(const NtkFeatures& f, const ParamVector& w) {
    Vector delta(w.flat().begin(), w.flat().end());
    axpy(-1.0, f.w0.flat(), delta);
    return delta;
}

Vector predict_one(const NtkFeatures& f, std::size_t i, std::span<const double> delta) {
    const std::size_t o = f.outputs();
    Vector pred(o);
    for (std::size_t j = 0; j < o; ++j) pred[j] = f.f0(i, j) + dot(f.jacobian.row(i * o + j), delta);
    return pred;
}

}  // namespace

Matrix lin_forward(const NtkFeatures& features, const ParamVector& w) {
    require_same_arch(features, w);
    const Vector delta = displacement(features, w);
    Matrix out(features.examples(), features.outputs());
    for (std::size_t i = 0; i < features.examples(); ++i) {
        const Vector p = predict_one(features, i, delta);
        std::copy(p.begin(), p.end(), out.row(i).begin());
    }
    return out;
}

Vector lin_per_example_grad(const NtkFeatures& features, std::size_t example, const ParamVector& w,
                            std::span<const double> label, LossKind loss) {
    require_same_arch(features, w);
    if (example >= features.examples()) throw ValidationError("lin_per_example_grad: example out of range");
    validate_label(loss, label, features.outputs());
    const Vector delta = displacement(features, w);
    const Vector residual = loss_derivative(loss, predict_one(features, example, delta), label);
    Vector g(w.size(), 0.0);
    const std::size_t o = features.outputs();
    for (std::size_t j = 0; j < o; ++j) axpy(residual[j], features.jacobian.row(example * o + j), g);
    return g;
}

Vector lin_empirical_grad(const NtkFeatures& features, const ParamVector& w, const Matrix& labels,
                          LossKind loss) {
    require_same_arch(features, w);
    const std::size_t n = features.examples(), o = features.outputs();
    if (n == 0) throw EmptyInputError("lin_empirical_grad: empty dataset");
    if (labels.rows() != n) throw DimensionError("lin_empirical_grad: label count mismatch");
    const Vector delta = displacement(features, w);
    Vector g(w.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        validate_label(loss, labels.row(i), o);
        const Vector residual = loss_derivative(loss, predict_one(features, i, delta), labels.row(i));
        for (std::size_t j = 0; j < o; ++j) axpy(residual[j], features.jacobian.row(i * o + j), g);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& v : g) v *= inv_n;
    return g;
}

double lin_empirical_loss(const NtkFeatures& features, const ParamVector& w, const Matrix& labels,
                          LossKind loss) {
    const Matrix pred = lin_forward(features, w);
    if (pred.rows() == 0) throw EmptyInputError("lin_empirical_loss: empty dataset");
    if (labels.rows() != pred.rows()) throw DimensionError("lin_empirical_loss: label count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.rows(); ++i) total += loss_value(loss, pred.row(i), labels.row(i));
    return total / static_cast<double>(pred.rows());
}

GramAnalysis gram_analysis(const NtkFeatures& features, double tol) {
    if (features.outputs() != 1) throw ValidationError("gram_analysis: single-output networks only");
    GramAnalysis g{gram_of_rows(features.jacobian), 0.0, 0};
    const Spectrum s = psd_spectrum(g.gram, tol);
    g.lambda0 = s.lambda_min_nonzero;
    g.rank = s.rank;
    return g;
}

double default_lazy_ridge(const Matrix& gram) {
    if (gram.rows() == 0) return 0.0;
    return 1e-10 * gram.trace() / static_cast<double>(gram.rows());
}

LazySolution lazy_solution(const NtkFeatures& features, std::span<const double> labels,
                           std::optional<double> ridge) {
    if (features.outputs() != 1) throw ValidationError("lazy_solution: single-output networks only");
    const std::size_t n = features.examples();
    if (n == 0) throw EmptyInputError("lazy_solution: empty dataset");
    if (labels.size() != n) throw DimensionError("lazy_solution: label count mismatch");
    for (double y : labels)
        if (y != 1.0 && y != -1.0) throw ValidationError("lazy_solution: labels must be +-1");

    const GramAnalysis ga = gram_analysis(features);
    if (ga.rank < n) throw RankDeficientError(ga.rank, n);

    const double scale = 2.0 * std::log(static_cast<double>(n));
    Vector target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = scale * labels[i] - features.f0(i, 0);

    LazySolution sol{features.w0, {}, 0.0, 0.0, 0.0, ridge.value_or(default_lazy_ridge(ga.gram))};
    sol.dual = solve_psd(ga.gram, target, sol.ridge);
    axpy(1.0, matvec_transposed(features.jacobian, sol.dual), sol.w_star.flat());
    sol.distance_sq = dot(sol.dual, matvec(ga.gram, sol.dual));

    Matrix y(n, 1, Vector(labels.begin(), labels.end()));
    sol.achieved_loss = lin_empirical_loss(features, sol.w_star, y, LossKind::LogisticSingle);
    // The logistic loss is nonnegative, so its infimum is at least 0.
    sol.alpha_gap = sol.achieved_loss;
    return sol;
}

ParamVector running_average(std::span<const ParamVector> iterates) {
    if (iterates.empty()) throw EmptyInputError("running_average: no iterates");
    IterateAverage avg(iterates.front().arch());
    for (const ParamVector& w : iterates) avg.add(w);
    return avg.mean();
}

IterateAverage::IterateAverage(const NetArch& arch) : arch_(arch), sum_(arch.param_count(), 0.0) {}

void IterateAverage::add(const ParamVector& w) {
    if (!(w.arch() == arch_)) throw DimensionError("IterateAverage: architecture mismatch");
    axpy(1.0, w.flat(), sum_);
    ++count_;
}

ParamVector IterateAverage::mean() const {
    if (count_ == 0) throw EmptyInputError("IterateAverage: no iterates");
    Vector m = sum_;
    const double inv = 1.0 / static_cast<double>(count_);
    for (double& v : m) v *= inv;
    return ParamVector(arch_, std::move(m));
}

}  // namespace klpriv
