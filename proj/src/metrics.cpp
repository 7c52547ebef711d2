#include "gmmsum/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gmmsum/error.hpp"

namespace gmmsum {

EmpiricalCdf::EmpiricalCdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.empty()) throw InvalidArgument("empirical CDF needs at least one sample");
    for (double v : sorted_)
        if (!std::isfinite(v)) throw InvalidArgument("empirical CDF samples must be finite");
    std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

namespace {

struct Mixture1d {
    std::vector<double> w, mu, sigma;

    explicit Mixture1d(const Gmm& gmm) {
        if (gmm.dim() != 1) throw DimensionMismatch("expected a one-dimensional GMM");
        for (const auto& g : gmm.components()) {
            w.push_back(g.weight());
            mu.push_back(g.mean()[0]);
            sigma.push_back(std::sqrt(g.covariance(0, 0)));
        }
    }

    double cdf(double x) const {
        double s = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * normal_cdf((x - mu[j]) / sigma[j]);
        return std::clamp(s, 0.0, 1.0);
    }

    // d/dx antiderivative(x) = cdf(x)
    double antiderivative(double x) const {
        double s = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double z = (x - mu[j]) / sigma[j];
            s += w[j] * sigma[j] * (z * normal_cdf(z) + normal_pdf(z));
        }
        return s;
    }

    // Integral of (cdf - c) over [a, b].
    double signed_integral(double a, double b, double c) const {
        return antiderivative(b) - antiderivative(a) - c * (b - a);
    }
};

// Integral of |F - c| over [a, b] where F is non-decreasing.
double abs_step(const Mixture1d& m, double a, double b, double c) {
    if (!(b > a)) return 0.0;
    const double fa = m.cdf(a) - c;
    const double fb = m.cdf(b) - c;
    if (fa >= 0.0) return std::abs(m.signed_integral(a, b, c));
    if (fb <= 0.0) return std::abs(m.signed_integral(a, b, c));
    double lo = a, hi = b;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (m.cdf(mid) - c < 0.0) lo = mid;
        else hi = mid;
    }
    const double x = 0.5 * (lo + hi);
    return std::abs(m.signed_integral(a, x, c)) + std::abs(m.signed_integral(x, b, c));
}

}  // namespace

double wasserstein_1d(const EmpiricalCdf& ecdf, const Gmm& gmm) {
    const Mixture1d m(gmm);
    const auto xs = ecdf.sorted();
    const double n = static_cast<double>(xs.size());
    double mu_lo = INFINITY, mu_hi = -INFINITY, sigma_max = 0.0;
    for (std::size_t j = 0; j < m.w.size(); ++j) {
        mu_lo = std::min(mu_lo, m.mu[j]);
        mu_hi = std::max(mu_hi, m.mu[j]);
        sigma_max = std::max(sigma_max, m.sigma[j]);
    }
    const double lo = std::min(xs.front(), mu_lo - 8.0 * sigma_max);
    const double hi = std::max(xs.back(), mu_hi + 8.0 * sigma_max);

    double total = abs_step(m, lo, xs.front(), 0.0);
    std::size_t i = 0;
    while (i < xs.size()) {
        std::size_t j = i;
        while (j + 1 < xs.size() && xs[j + 1] == xs[i]) ++j;
        const double level = static_cast<double>(j + 1) / n;
        const double right = j + 1 < xs.size() ? xs[j + 1] : hi;
        total += abs_step(m, xs[i], right, level);
        i = j + 1;
    }
    return total;
}

std::vector<double> outlier_scores(const PointSet& samples, const Gmm& gmm) {
    if (!samples.empty() && samples.dim() != gmm.dim())
        throw DimensionMismatch("sample dimension does not match the GMM");
    std::vector<double> scores(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double best = INFINITY;
        for (const auto& g : gmm.components()) best = std::min(best, g.mahalanobis_sq(samples[i]));
        scores[i] = std::sqrt(best);
    }
    return scores;
}

std::vector<std::uint32_t> rank_outliers(const PointSet& samples, const Gmm& gmm) {
    const auto scores = outlier_scores(samples, gmm);
    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });
    return order;
}

std::size_t outlier_count(double p, std::size_t n) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("outlier fraction must lie in [0, 1]");
    // The small slack keeps products like 0.02 * 150 from rounding up to 4.
    const double k = std::ceil(p * static_cast<double>(n) - 1e-9);
    return std::min(n, static_cast<std::size_t>(std::max(0.0, k)));
}

}  // namespace gmmsum
