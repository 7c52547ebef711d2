#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace gmmsum {

// Dense row-major matrix. Sizes in this code base are tiny (d <= 3 in
// practice) so there is no blocking or expression templates.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    Matrix transposed() const;
    double trace() const;
    double max_abs() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
std::vector<double> operator*(const Matrix& a, std::span<const double> x);

// Symmetric matrices are stored as packed lower triangles: entry (i, j) with
// i >= j lives at i*(i+1)/2 + j.
inline std::size_t packed_size(std::size_t d) { return d * (d + 1) / 2; }
inline std::size_t packed_index(std::size_t i, std::size_t j) {
    return i >= j ? i * (i + 1) / 2 + j : j * (j + 1) / 2 + i;
}
std::vector<double> pack_lower(const Matrix& symmetric);
Matrix unpack_lower(std::span<const double> packed, std::size_t d);

// max_ij |(A B - I)_ij|
double identity_residual(const Matrix& a, const Matrix& b);

struct CholeskyInverse {
    Matrix inverse;
    Matrix lower;              // L with A' = L L^T, A' the (possibly regularized) input
    double log_det = 0.0;      // ln |A'|
    double regularization = 0.0;  // value added to the diagonal, 0 if none
};

// Inverts a symmetric positive definite matrix through its Cholesky factor.
// A matrix that is not numerically positive definite (or whose inverse does
// not reproduce the identity to 1e-8) is regularized by adding
// eps * trace / d to the diagonal, eps = 1e-9, retried up to three more
// times with eps scaled by 100. Throws SingularMatrix when every attempt fails.
CholeskyInverse cholesky_invert(const Matrix& cov);

// Plain Cholesky factorization without regularization; returns false when a
// pivot is not strictly positive.
bool cholesky_factor(const Matrix& a, Matrix& lower);

struct SymmetricEigen {
    std::vector<double> values;  // descending
    Matrix vectors;              // column k is the eigenvector of values[k]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
SymmetricEigen symmetric_eigen(const Matrix& symmetric);

}  // namespace gmmsum
