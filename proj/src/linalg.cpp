#include "gmmsum/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gmmsum/error.hpp"

namespace gmmsum {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionMismatch("matrix value count does not match its shape");
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionMismatch("ragged matrix initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double Matrix::trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matrix product shape mismatch");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("matrix sum shape mismatch");
    Matrix out = a;
    for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] += b.values()[i];
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("matrix difference shape mismatch");
    Matrix out = a;
    for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] -= b.values()[i];
    return out;
}

std::vector<double> operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw DimensionMismatch("matrix-vector shape mismatch");
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
    return y;
}

std::vector<double> pack_lower(const Matrix& symmetric) {
    if (!symmetric.square()) throw DimensionMismatch("packing requires a square matrix");
    const std::size_t d = symmetric.rows();
    std::vector<double> packed(packed_size(d));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) packed[packed_index(i, j)] = symmetric(i, j);
    return packed;
}

Matrix unpack_lower(std::span<const double> packed, std::size_t d) {
    if (packed.size() != packed_size(d)) throw DimensionMismatch("packed triangle has the wrong length");
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            m(i, j) = packed[packed_index(i, j)];
            m(j, i) = m(i, j);
        }
    return m;
}

double identity_residual(const Matrix& a, const Matrix& b) {
    const Matrix p = a * b;
    double r = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < p.cols(); ++j)
            r = std::max(r, std::abs(p(i, j) - (i == j ? 1.0 : 0.0)));
    return r;
}

bool cholesky_factor(const Matrix& a, Matrix& lower) {
    const std::size_t d = a.rows();
    lower = Matrix(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= lower(j, k) * lower(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag)) return false;
        const double ljj = std::sqrt(diag);
        lower(j, j) = ljj;
        for (std::size_t i = j + 1; i < d; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
            lower(i, j) = s / ljj;
        }
    }
    return true;
}

namespace {

bool try_invert(const Matrix& a, CholeskyInverse& out) {
    Matrix lower;
    if (!cholesky_factor(a, lower)) return false;
    const std::size_t d = a.rows();

    // L^{-1} by forward substitution, then A^{-1} = L^{-T} L^{-1}.
    Matrix linv(d, d);
    for (std::size_t c = 0; c < d; ++c) {
        linv(c, c) = 1.0 / lower(c, c);
        for (std::size_t r = c + 1; r < d; ++r) {
            double s = 0.0;
            for (std::size_t k = c; k < r; ++k) s += lower(r, k) * linv(k, c);
            linv(r, c) = -s / lower(r, r);
        }
    }
    Matrix inv(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t k = i; k < d; ++k) s += linv(k, i) * linv(k, j);
            inv(i, j) = s;
            inv(j, i) = s;
        }
    if (identity_residual(a, inv) >= 1e-8) return false;

    double log_det = 0.0;
    for (std::size_t i = 0; i < d; ++i) log_det += 2.0 * std::log(lower(i, i));
    out.inverse = std::move(inv);
    out.lower = std::move(lower);
    out.log_det = log_det;
    return true;
}

}  // namespace

CholeskyInverse cholesky_invert(const Matrix& cov) {
    if (!cov.square() || cov.rows() == 0) throw DimensionMismatch("covariance must be a non-empty square matrix");
    for (double v : cov.values())
        if (!std::isfinite(v)) throw InvalidArgument("covariance contains non-finite entries");
    const std::size_t d = cov.rows();
    // Symmetrize; callers hand in matrices assembled from packed triangles or
    // from accumulations that may differ in the last bit.
    Matrix sym(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) sym(i, j) = 0.5 * (cov(i, j) + cov(j, i));

    CholeskyInverse out;
    if (try_invert(sym, out)) return out;

    const double trace = sym.trace();
    const double scale = trace > 0.0 ? trace / static_cast<double>(d) : std::max(1.0, sym.max_abs());
    double eps = 1e-9;
    for (int attempt = 0; attempt < 4; ++attempt, eps *= 100.0) {
        Matrix reg = sym;
        const double add = eps * scale;
        for (std::size_t i = 0; i < d; ++i) reg(i, i) += add;
        if (try_invert(reg, out)) {
            out.regularization = add;
            return out;
        }
    }
    throw SingularMatrix("covariance is singular after regularization");
}

SymmetricEigen symmetric_eigen(const Matrix& symmetric) {
    if (!symmetric.square()) throw DimensionMismatch("eigendecomposition requires a square matrix");
    const std::size_t n = symmetric.rows();
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (symmetric(i, j) + symmetric(j, i));
    Matrix v = Matrix::identity(n);

    double frob = 0.0;
    for (double x : a.values()) frob += x * x;
    frob = std::sqrt(frob);

    auto off = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < 100 && frob > 0.0 && off() > 1e-15 * frob; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                // 2x2 symmetric Schur decomposition.
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = tau >= 0.0 ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                            : -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // A <- J^T A J
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    SymmetricEigen out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
    }
    return out;
}

}  // namespace gmmsum
