#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gmmsum/gmm.hpp"
#include "gmmsum/point_set.hpp"

namespace gmmsum {

class EmpiricalCdf {
public:
    // Throws InvalidArgument on an empty sample set.
    explicit EmpiricalCdf(std::vector<double> samples);

    // Fraction of samples <= x.
    double operator()(double x) const;
    std::span<const double> sorted() const { return sorted_; }
    std::size_t size() const { return sorted_.size(); }

private:
    std::vector<double> sorted_;
};

// Integral of |F_data - F_gmm| over
// [min(x_min, mu_min - 8 sigma_max), max(x_max, mu_max + 8 sigma_max)].
// Exact per step of F_data: the mixture CDF has a closed-form antiderivative
// and the single possible sign change inside a step is located by bisection.
double wasserstein_1d(const EmpiricalCdf& ecdf, const Gmm& gmm);

// Mahalanobis distance to the closest component.
std::vector<double> outlier_scores(const PointSet& samples, const Gmm& gmm);

// Sample indices ordered by descending score; ties keep ascending index.
std::vector<std::uint32_t> rank_outliers(const PointSet& samples, const Gmm& gmm);

// Number of outliers taken for fraction p of a cluster of size n: ceil(p n).
std::size_t outlier_count(double p, std::size_t n);

}  // namespace gmmsum
