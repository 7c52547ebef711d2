#include <doctest.h>

#include <cmath>
#include <random>

#include "gmmsum/error.hpp"
#include "gmmsum/metrics.hpp"
#include "oracles.hpp"

using namespace gmmsum;

namespace {
Gmm to_gmm(const oracle::Mix1& m) {
    std::vector<GaussianComponent> c;
    for (std::size_t j = 0; j < m.w.size(); ++j) c.emplace_back(m.w[j], std::vector<double>{m.mu[j]}, Matrix{{m.var[j]}});
    return Gmm(c);
}
}  // namespace

TEST_CASE("empirical CDF agrees with a linear scan") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> v(0, 20);
    std::vector<double> s(300);
    for (auto& x : s) x = v(rng) * 0.5;  // plenty of ties
    const EmpiricalCdf f(s);
    for (double x = -1.0; x <= 11.0; x += 0.25) CHECK(f(x) == oracle::ecdf_linear(s, x));
    CHECK_THROWS_AS(EmpiricalCdf({}), InvalidArgument);
    CHECK_THROWS_AS(EmpiricalCdf({1.0, NAN}), InvalidArgument);
}

TEST_CASE("1D Wasserstein matches quadrature") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-3.0, 3.0), sd(0.2, 2.0);
    std::exponential_distribution<double> ex(0.7);
    for (int trial = 0; trial < 25; ++trial) {
        oracle::Mix1 m;
        const int k = 1 + trial % 3;
        for (int j = 0; j < k; ++j) {
            m.w.push_back(0.5 + j);
            m.mu.push_back(u(rng));
            m.var.push_back(std::pow(sd(rng), 2));
        }
        double tot = 0.0;
        for (double w : m.w) tot += w;
        for (double& w : m.w) w /= tot;
        std::vector<double> s(60 + trial * 7);
        for (auto& x : s) x = trial % 2 ? ex(rng) : u(rng);
        const double got = wasserstein_1d(EmpiricalCdf(s), to_gmm(m));
        CHECK(got == doctest::Approx(oracle::wasserstein_quadrature(s, m)).epsilon(1e-7));
    }
}

TEST_CASE("Wasserstein is zero-ish for a large sample of the model itself and grows with shift") {
    const oracle::Mix1 m{{1.0}, {0.0}, {1.0}};
    const Gmm g = to_gmm(m);
    const auto s = sample_gmm(g, 20000, 3);
    const std::vector<double> xs(s.values().begin(), s.values().end());
    const double w0 = wasserstein_1d(EmpiricalCdf(xs), g);
    CHECK(w0 < 0.02);
    std::vector<double> shifted = xs;
    for (double& x : shifted) x += 1.0;
    CHECK(wasserstein_1d(EmpiricalCdf(shifted), g) == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("outlier ranking sorts by distance to the closest component") {
    const Gmm g({GaussianComponent(0.5, {0.0, 0.0}, Matrix::identity(2)),
                 GaussianComponent(0.5, {10.0, 0.0}, Matrix::identity(2))});
    PointSet p(2);
    p.push_back(std::vector<double>{0.1, 0.0});
    p.push_back(std::vector<double>{5.0, 0.0});
    p.push_back(std::vector<double>{10.0, 3.0});
    p.push_back(std::vector<double>{9.9, 0.0});
    const auto scores = outlier_scores(p, g);
    CHECK(scores[0] == doctest::Approx(0.1));
    CHECK(scores[1] == doctest::Approx(5.0));
    const auto order = rank_outliers(p, g);
    CHECK(order == std::vector<std::uint32_t>{1, 2, 0, 3});
}

TEST_CASE("outlier count rounds up") {
    CHECK(outlier_count(0.0, 100) == 0);
    CHECK(outlier_count(0.01, 100) == 1);
    CHECK(outlier_count(0.015, 100) == 2);
    CHECK(outlier_count(1.0, 7) == 7);
    CHECK_THROWS_AS(outlier_count(1.5, 10), InvalidArgument);
}
