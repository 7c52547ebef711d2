#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gmmsum/linalg.hpp"
#include "gmmsum/point_set.hpp"

namespace gmmsum {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLog2Pi = 1.83787706640934548356;

// One weighted Gaussian. The covariance is stored as a packed lower
// triangle; inverse, Cholesky factor and log-determinant are cached at
// construction. If the covariance had to be regularized, the stored
// covariance is the regularized one so that it always matches the cache.
class GaussianComponent {
public:
    GaussianComponent(double weight, std::vector<double> mean, const Matrix& covariance);
    static GaussianComponent from_packed(double weight, std::vector<double> mean, std::span<const double> packed_cov);

    std::size_t dim() const { return mean_.size(); }
    double weight() const { return weight_; }
    std::span<const double> mean() const { return mean_; }
    std::span<const double> packed_covariance() const { return packed_cov_; }
    Matrix covariance() const { return unpack_lower(packed_cov_, dim()); }
    double covariance(std::size_t i, std::size_t j) const { return packed_cov_[packed_index(i, j)]; }
    const Matrix& inverse() const { return inverse_; }
    const Matrix& cholesky() const { return lower_; }
    double log_det() const { return log_det_; }
    double regularization() const { return regularization_; }

    GaussianComponent with_weight(double weight) const;

    // (x - mu)^T Sigma^{-1} (x - mu)
    double mahalanobis_sq(std::span<const double> x) const;
    // log N(x; mu, Sigma), weight excluded.
    double log_density(std::span<const double> x) const;

    bool operator==(const GaussianComponent& o) const {
        return weight_ == o.weight_ && mean_ == o.mean_ && packed_cov_ == o.packed_cov_;
    }

private:
    double weight_;
    std::vector<double> mean_;
    std::vector<double> packed_cov_;
    Matrix inverse_;
    Matrix lower_;
    double log_det_ = 0.0;
    double regularization_ = 0.0;
};

// Mixture of K >= 1 components of equal dimension. Weights are normalized to
// sum to one at construction.
class Gmm {
public:
    explicit Gmm(std::vector<GaussianComponent> components);

    std::size_t dim() const { return components_.front().dim(); }
    std::size_t size() const { return components_.size(); }
    const std::vector<GaussianComponent>& components() const { return components_; }
    const GaussianComponent& operator[](std::size_t j) const { return components_[j]; }

    // Marginal over the listed coordinates (row/column selection of mu, Sigma).
    Gmm marginal(std::span<const std::size_t> coords) const;

    bool operator==(const Gmm&) const = default;

private:
    std::vector<GaussianComponent> components_;
};

double gaussian_density(const GaussianComponent& g, std::span<const double> x);
double gmm_density(const Gmm& gmm, std::span<const double> x);
double gmm_log_density(const Gmm& gmm, std::span<const double> x);

// Standard normal CDF and density.
double normal_cdf(double z);
double normal_pdf(double z);

// Mixture CDF of a one-dimensional GMM.
double gmm_cdf_1d(const Gmm& gmm, double x);

// Draws n samples: component by weight, then mu + L z with z standard normal.
PointSet sample_gmm(const Gmm& gmm, std::size_t n, std::uint64_t seed);

}  // namespace gmmsum
