#include "gmmsum/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gmmsum/error.hpp"

namespace gmmsum {

GaussianComponent::GaussianComponent(double weight, std::vector<double> mean, const Matrix& covariance)
    : weight_(weight), mean_(std::move(mean)) {
    if (!(weight_ > 0.0) || !std::isfinite(weight_)) throw InvalidArgument("component weight must be positive and finite");
    if (mean_.empty()) throw InvalidArgument("component mean must not be empty");
    if (covariance.rows() != mean_.size() || covariance.cols() != mean_.size())
        throw DimensionMismatch("covariance shape does not match mean length");
    for (double v : mean_)
        if (!std::isfinite(v)) throw InvalidArgument("component mean must be finite");

    CholeskyInverse ci = cholesky_invert(covariance);
    const std::size_t d = mean_.size();
    packed_cov_.resize(packed_size(d));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double v = 0.5 * (covariance(i, j) + covariance(j, i));
            if (i == j) v += ci.regularization;
            packed_cov_[packed_index(i, j)] = v;
        }
    inverse_ = std::move(ci.inverse);
    lower_ = std::move(ci.lower);
    log_det_ = ci.log_det;
    regularization_ = ci.regularization;
}

GaussianComponent GaussianComponent::from_packed(double weight, std::vector<double> mean, std::span<const double> packed_cov) {
    const std::size_t d = mean.size();
    return GaussianComponent(weight, std::move(mean), unpack_lower(packed_cov, d));
}

GaussianComponent GaussianComponent::with_weight(double weight) const {
    if (!(weight > 0.0) || !std::isfinite(weight)) throw InvalidArgument("component weight must be positive and finite");
    GaussianComponent copy = *this;
    copy.weight_ = weight;
    return copy;
}

double GaussianComponent::mahalanobis_sq(std::span<const double> x) const {
    const std::size_t d = dim();
    if (x.size() != d) throw DimensionMismatch("point dimension does not match the Gaussian");
    double diff[16];
    std::vector<double> heap;
    double* dx = diff;
    if (d > 16) {
        heap.resize(d);
        dx = heap.data();
    }
    for (std::size_t i = 0; i < d; ++i) dx[i] = x[i] - mean_[i];
    double q = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < d; ++j) row += inverse_(i, j) * dx[j];
        q += dx[i] * row;
    }
    return std::max(q, 0.0);
}

double GaussianComponent::log_density(std::span<const double> x) const {
    const double d = static_cast<double>(dim());
    return -0.5 * (d * kLog2Pi + log_det_ + mahalanobis_sq(x));
}

Gmm::Gmm(std::vector<GaussianComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw InvalidArgument("a GMM needs at least one component");
    const std::size_t d = components_.front().dim();
    double total = 0.0;
    for (const auto& c : components_) {
        if (c.dim() != d) throw DimensionMismatch("GMM components differ in dimension");
        total += c.weight();
    }
    // Already-normalized weights are kept as is so that a reload does not drift.
    if (std::abs(total - 1.0) > 1e-14)
        for (auto& c : components_) c = c.with_weight(c.weight() / total);
}

Gmm Gmm::marginal(std::span<const std::size_t> coords) const {
    if (coords.empty()) throw InvalidArgument("marginal needs at least one coordinate");
    for (std::size_t c : coords)
        if (c >= dim()) throw DimensionMismatch("marginal coordinate out of range");
    std::vector<GaussianComponent> out;
    out.reserve(size());
    const std::size_t k = coords.size();
    for (const auto& g : components_) {
        std::vector<double> mean(k);
        Matrix cov(k, k);
        for (std::size_t a = 0; a < k; ++a) {
            mean[a] = g.mean()[coords[a]];
            for (std::size_t b = 0; b < k; ++b) cov(a, b) = g.covariance(coords[a], coords[b]);
        }
        out.emplace_back(g.weight(), std::move(mean), cov);
    }
    return Gmm(std::move(out));
}

double gaussian_density(const GaussianComponent& g, std::span<const double> x) {
    return std::exp(g.log_density(x));
}

double gmm_density(const Gmm& gmm, std::span<const double> x) {
    if (x.size() != gmm.dim()) throw DimensionMismatch("point dimension does not match the GMM");
    double s = 0.0;
    for (const auto& g : gmm.components()) s += g.weight() * gaussian_density(g, x);
    return s;
}

double gmm_log_density(const Gmm& gmm, std::span<const double> x) {
    if (x.size() != gmm.dim()) throw DimensionMismatch("point dimension does not match the GMM");
    double best = -INFINITY;
    std::vector<double> terms;
    terms.reserve(gmm.size());
    for (const auto& g : gmm.components()) {
        terms.push_back(std::log(g.weight()) + g.log_density(x));
        best = std::max(best, terms.back());
    }
    if (!std::isfinite(best)) return best;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - best);
    return best + std::log(s);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

double gmm_cdf_1d(const Gmm& gmm, double x) {
    if (gmm.dim() != 1) throw DimensionMismatch("gmm_cdf_1d requires a one-dimensional GMM");
    double s = 0.0;
    for (const auto& g : gmm.components()) {
        const double sigma = std::sqrt(g.covariance(0, 0));
        s += g.weight() * normal_cdf((x - g.mean()[0]) / sigma);
    }
    return std::clamp(s, 0.0, 1.0);
}

PointSet sample_gmm(const Gmm& gmm, std::size_t n, std::uint64_t seed) {
    const std::size_t d = gmm.dim();
    PointSet out(d);
    if (n == 0) return out;
    out.reserve(n);
    std::mt19937_64 rng(seed);
    std::vector<double> weights;
    for (const auto& g : gmm.components()) weights.push_back(g.weight());
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::normal_distribution<double> normal;
    std::vector<double> z(d), x(d);
    for (std::size_t s = 0; s < n; ++s) {
        const auto& g = gmm[pick(rng)];
        for (auto& v : z) v = normal(rng);
        const Matrix& l = g.cholesky();
        for (std::size_t i = 0; i < d; ++i) {
            double v = g.mean()[i];
            for (std::size_t j = 0; j <= i; ++j) v += l(i, j) * z[j];
            x[i] = v;
        }
        out.push_back(x);
    }
    return out;
}

}  // namespace gmmsum
