#include "klpriv/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "klpriv/errors.hpp"

namespace klpriv {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (entries_.size() != rows * cols) {
        throw DimensionError("matrix entries: expected " + std::to_string(rows * cols) +
                             ", got " + std::to_string(entries_.size()));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

bool Matrix::all_finite() const {
    return std::all_of(entries_.begin(), entries_.end(), [](double v) { return std::isfinite(v); });
}

double Matrix::trace() const {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
    return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_norm(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw DimensionError("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("squared_distance: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) axpy(a(i, k), b.row(k), out);
    }
    return c;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw DimensionError("matvec: dimension mismatch");
    Vector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) throw DimensionError("matvec_transposed: dimension mismatch");
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) axpy(x[i], a.row(i), y);
    return y;
}

Matrix gram_of_rows(const Matrix& a) {
    Matrix g(a.rows(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = dot(a.row(i), a.row(j));
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double variance, RngStream& rng) {
    if (rows * cols == 0) throw EmptyInputError("gaussian_matrix: empty shape");
    if (!(variance >= 0.0)) throw ValidationError("gaussian_matrix: variance must be >= 0");
    Matrix m(rows, cols);
    if (variance == 0.0) return m;
    const double sd = std::sqrt(variance);
    for (double& v : m.entries()) v = sd * rng.normal();
    return m;
}

namespace {

void require_square_finite(const Matrix& k, const char* what) {
    if (k.rows() != k.cols()) throw DimensionError(std::string(what) + ": matrix is not square");
    if (!k.all_finite()) throw NonFiniteError(std::string(what) + ": non-finite entry");
}

Matrix symmetrized(const Matrix& k) {
    Matrix s(k.rows(), k.cols());
    for (std::size_t i = 0; i < k.rows(); ++i)
        for (std::size_t j = 0; j < k.cols(); ++j) s(i, j) = 0.5 * (k(i, j) + k(j, i));
    return s;
}

double off_diagonal_sq(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return s;
}

// Lower Cholesky factor of a, or nullopt when a pivot is not positive or
// falls below rel_floor times the largest diagonal entry.
std::optional<Matrix> cholesky(const Matrix& a, double rel_floor) {
    const std::size_t n = a.rows();
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a(i, i));
    if (max_diag <= 0.0) return std::nullopt;
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > rel_floor * max_diag)) return std::nullopt;
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

Vector cholesky_solve(const Matrix& l, std::span<const double> b) {
    const std::size_t n = l.rows();
    Vector y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) y[i] -= l(i, k) * y[k];
        y[i] /= l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) y[i] -= l(k, i) * y[k];
        y[i] /= l(i, i);
    }
    return y;
}

}  // namespace

SymmetricEigen jacobi_eigen(const Matrix& k) {
    require_square_finite(k, "jacobi_eigen");
    const std::size_t n = k.rows();
    Matrix a = symmetrized(k);
    Matrix v = Matrix::identity(n);

    double total = 0.0;
    for (double x : a.entries()) total += x * x;
    const double stop = total * 1e-32;

    for (int sweep = 0; sweep < 100; ++sweep) {
        if (off_diagonal_sq(a) <= stop) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t r = 0; r < n; ++r) {
                    const double arp = a(r, p), arq = a(r, q);
                    a(r, p) = c * arp - s * arq;
                    a(r, q) = s * arp + c * arq;
                }
                for (std::size_t r = 0; r < n; ++r) {
                    const double apr = a(p, r), aqr = a(q, r);
                    a(p, r) = c * apr - s * aqr;
                    a(q, r) = s * apr + c * aqr;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    const double vrp = v(r, p), vrq = v(r, q);
                    v(r, p) = c * vrp - s * vrq;
                    v(r, q) = s * vrp + c * vrq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
    for (std::size_t k2 = 0; k2 < n; ++k2) {
        out.values[k2] = a(order[k2], order[k2]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, k2) = v(r, order[k2]);
    }
    return out;
}

Spectrum psd_spectrum(const Matrix& k, double tol) {
    require_square_finite(k, "psd_spectrum");
    Spectrum s;
    if (k.rows() == 0) return s;
    s.eigenvalues = jacobi_eigen(k).values;
    const double top = s.eigenvalues.back();
    if (top <= 0.0) return s;
    const double cut = tol * top;
    for (double ev : s.eigenvalues) {
        if (ev > cut) {
            if (s.rank == 0) s.lambda_min_nonzero = ev;
            ++s.rank;
        }
    }
    return s;
}

Vector solve_psd(const Matrix& k, std::span<const double> b, double ridge) {
    require_square_finite(k, "solve_psd");
    if (b.size() != k.rows()) throw DimensionError("solve_psd: rhs length differs from matrix size");
    if (!(ridge >= 0.0)) throw ValidationError("solve_psd: ridge must be >= 0");
    const std::size_t n = k.rows();
    if (n == 0) return {};

    Matrix a = symmetrized(k);
    for (std::size_t i = 0; i < n; ++i) a(i, i) += ridge;

    // A positive ridge makes every pivot admissible; without one, pivots below
    // the rank tolerance mean K is singular for our purposes.
    const double pivot_floor = ridge > 0.0 ? 0.0 : kDefaultRankTolerance;
    if (auto l = cholesky(a, pivot_floor)) {
        Vector x = cholesky_solve(*l, b);
        // Two rounds of iterative refinement.
        for (int it = 0; it < 2; ++it) {
            Vector r(b.begin(), b.end());
            const Vector ax = matvec(a, x);
            for (std::size_t i = 0; i < n; ++i) r[i] -= ax[i];
            axpy(1.0, cholesky_solve(*l, r), x);
        }
        return x;
    }

    const SymmetricEigen eig = jacobi_eigen(a);
    const double top = std::max(eig.values.back(), 0.0);
    const double cut = kDefaultRankTolerance * top;
    std::size_t rank = 0;
    for (double ev : eig.values) rank += ev > cut ? 1 : 0;
    if (ridge == 0.0 && rank < n) throw RankDeficientError(rank, n);

    // Minimum-norm least squares through the pseudo-inverse.
    Vector x(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double ev = eig.values[j];
        if (!(ev > cut)) continue;
        double proj = 0.0;
        for (std::size_t i = 0; i < n; ++i) proj += eig.vectors(i, j) * b[i];
        proj /= ev;
        for (std::size_t i = 0; i < n; ++i) x[i] += proj * eig.vectors(i, j);
    }
    return x;
}

Vector finite_diff_gradient(const ScalarField& f, std::span<const double> point, double h) {
    if (!(h > 0.0)) throw ValidationError("finite_diff_gradient: step must be positive");
    Vector p(point.begin(), point.end());
    Vector g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double orig = p[i];
        p[i] = orig + h;
        const double up = f(p);
        p[i] = orig - h;
        const double down = f(p);
        p[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw NonFiniteError("finite_diff_gradient: non-finite function value");
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

}  // namespace klpriv
