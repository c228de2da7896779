#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "klpriv/rng.hpp"

namespace klpriv {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> diag);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return entries_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {entries_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {entries_.data() + r * cols_, cols_}; }

    std::span<double> entries() noexcept { return entries_; }
    std::span<const double> entries() const noexcept { return entries_; }

    Matrix transposed() const;
    bool all_finite() const;
    double trace() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> entries_;
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
/// ‖a − b‖²
double squared_distance(std::span<const double> a, std::span<const double> b);

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
/// aᵀ·x without forming the transpose.
Vector matvec_transposed(const Matrix& a, std::span<const double> x);
/// A·Aᵀ (Gram matrix of the rows).
Matrix gram_of_rows(const Matrix& a);

/// Entries i.i.d. N(0, variance). Throws EmptyInputError for a 0-sized shape.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double variance, RngStream& rng);

inline constexpr double kDefaultRankTolerance = 1e-10;

struct Spectrum {
    std::vector<double> eigenvalues;  // ascending
    std::size_t rank = 0;
    double lambda_min_nonzero = 0.0;  // 0 when rank == 0
};

struct SymmetricEigen {
    std::vector<double> values;  // ascending
    Matrix vectors;              // column k pairs with values[k]
};

/// Cyclic Jacobi rotations on (K + Kᵀ)/2.
SymmetricEigen jacobi_eigen(const Matrix& k);

/// Eigenvalues, numerical rank (eigenvalues above tol · max eigenvalue) and
/// the smallest eigenvalue counted in that rank.
Spectrum psd_spectrum(const Matrix& k, double tol = kDefaultRankTolerance);

/// Least-squares solution of (K + ridge·I)·α = b for symmetric PSD K.
/// With ridge = 0 a numerically singular K raises RankDeficientError.
Vector solve_psd(const Matrix& k, std::span<const double> b, double ridge = 0.0);

using ScalarField = std::function<double(std::span<const double>)>;

/// Central differences (f(p + h·eᵢ) − f(p − h·eᵢ)) / 2h for every coordinate.
Vector finite_diff_gradient(const ScalarField& f, std::span<const double> point, double h);

}  // namespace klpriv
