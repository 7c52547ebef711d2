#pragma once

// Reference implementations used only by tests. They deliberately share no
// code with the library beyond plain data types.

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "gmmsum/linalg.hpp"

namespace oracle {

using Vec = std::vector<double>;
using gmmsum::Matrix;

double det_small(const Matrix& m);
// Cofactor inverse, d <= 3.
Matrix adjugate_inverse(const Matrix& m);

// N(x; mean, cov) written out with the adjugate inverse.
double gaussian_pdf(std::span<const double> mean, const Matrix& cov, std::span<const double> x);

// Adaptive Gauss-Kronrod (7/15) quadrature on a finite interval, relative tolerance.
double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-13,
                 double abs_tol = 0.0);

// Integral of N(o + t n; mean, cov) over t in [t0, t1]; infinite bounds allowed.
double ray_integral(std::span<const double> mean, const Matrix& cov, std::array<double, 3> o, std::array<double, 3> n,
                    double t0, double t1);

// Random symmetric positive definite 3x3 matrix with eigenvalues in [lo, hi].
Matrix random_spd(std::mt19937_64& rng, std::size_t d, double lo, double hi);
std::array<double, 3> random_unit(std::mt19937_64& rng);

// Fraction of samples <= x, by linear scan.
double ecdf_linear(std::span<const double> samples, double x);

struct Mix1 {
    std::vector<double> w, mu, var;
};
double mix1_cdf(const Mix1& m, double x);
double mix1_sf(const Mix1& m, double x);  // 1 - cdf without cancellation
// Integral of |ECDF - CDF| by quadrature between sample break points plus tails.
double wasserstein_quadrature(std::span<const double> samples, const Mix1& m);

// Monte Carlo estimate of P(a <= X <= b).
double mix1_mc_probability(const Mix1& m, double a, double b, std::size_t n, std::uint64_t seed);

// Index of the center closest to x (ties: lowest index).
std::size_t nearest_center(std::span<const double> centers, std::size_t dim, std::span<const double> x);

}  // namespace oracle

namespace oracle {

// Closed-form integral of N(o + t n; mean, cov) over the whole line, written
// with the adjugate inverse.
double ray_integral_closed_form(std::span<const double> mean, const Matrix& cov, std::array<double, 3> o,
                                std::array<double, 3> n);

}  // namespace oracle
