#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "gmmsum/density.hpp"
#include "gmmsum/error.hpp"
#include "gmmsum/lod.hpp"
#include "oracles.hpp"

using namespace gmmsum;

TEST_CASE("bandwidth rules") {
    PointSet p(2);
    for (int i = 0; i < 50; ++i) p.push_back(std::vector<double>{double(i), 2.0 * (i % 5)});
    const auto h = kde_bandwidths(p, BandwidthRule::silverman);
    for (int c = 0; c < 2; ++c) {
        double m = 0, v = 0;
        for (std::size_t i = 0; i < p.size(); ++i) m += p[i][c];
        m /= 50;
        for (std::size_t i = 0; i < p.size(); ++i) v += (p[i][c] - m) * (p[i][c] - m);
        const double sd = std::sqrt(v / 49);
        CHECK(h[c] == doctest::Approx(sd * std::pow(4.0 / (4.0 * 50.0), 1.0 / 6.0)));
        CHECK(kde_bandwidths(p, BandwidthRule::scott)[c] == doctest::Approx(sd * std::pow(50.0, -1.0 / 6.0)));
    }
    CHECK_THROWS_AS(kde_bandwidths(PointSet(2), BandwidthRule::silverman), InvalidArgument);
}

TEST_CASE("KDE model is an equal-weight mixture centered on the samples") {
    PointSet p(1);
    for (double x : {0.0, 1.0, 4.0}) p.push_back(std::vector<double>{x});
    const Gmm g = kde_model(p);
    REQUIRE(g.size() == 3);
    const double h = kde_bandwidths(p, BandwidthRule::silverman)[0];
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(g[j].weight() == doctest::Approx(1.0 / 3.0));
        CHECK(g[j].mean()[0] == p[j][0]);
        CHECK(g[j].covariance(0, 0) == doctest::Approx(h * h));
    }
    // identical samples still give a usable model
    PointSet same(1);
    for (int i = 0; i < 4; ++i) same.push_back(std::vector<double>{2.0});
    CHECK(kde_model(same)[0].covariance(0, 0) > 0.0);
}

TEST_CASE("substitution follows the DOI threshold and feeds the density views") {
    std::vector<std::uint32_t> labels;
    const Dataset d = fixtures::blobs(40, 3, &labels);
    const Clustering c = Clustering::from_labels(labels);
    FitConfig cfg;
    cfg.max_components = 2;
    BuildOptions opt;
    opt.subset_filter = [](const SubsetKey& k) { return k.size() == 1 || k == SubsetKey{0, 3}; };
    const Summary s = build_summary(d, c, cfg, opt);
    const std::vector<double> doi{0.9, 0.1, 0.5};
    const auto lod = lod_substitute(s, doi, 0.5, d, c);
    CHECK(lod.substituted(0));
    CHECK_FALSE(lod.substituted(1));
    CHECK(lod.substituted(2));
    CHECK(lod.substituted_count() == 2);

    const Extent e{-5, 30};
    const auto with = density_1d(s, 0, e, 64, {}, &lod);
    for (std::size_t i = 0; i < 64; i += 7) {
        const double x = with.cell_center(0, i);
        double expect = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            const std::vector<double> px{x};
            const Gmm m = lod.substituted(k) ? kde_model(d.gather(c.members(k), std::vector<std::size_t>{0}))
                                             : s.clusters[k].gmm_1d(0);
            expect += 40.0 / 120.0 * gmm_density(m, px);
        }
        CHECK(with.values[i] == doctest::Approx(expect).epsilon(1e-12));
    }
    // 2D path uses the same substitution
    const auto g2 = density_2d(s, 0, 3, e, Extent{-5, 5}, 30, 20, {}, &lod);
    CHECK(g2.sum() > 0.0);

    const auto none = lod_substitute(s, doi, 2.0, d, c);
    CHECK(none.substituted_count() == 0);
    CHECK(density_1d(s, 0, e, 64, {}, &none).values == density_1d(s, 0, e, 64).values);

    const std::vector<double> short_doi{1.0};
    CHECK_THROWS_AS(lod_substitute(s, short_doi, 0.5, d, c), DimensionMismatch);
    CHECK_THROWS_AS(lod_substitute(s, doi, -1.0, d, c), InvalidArgument);
}
