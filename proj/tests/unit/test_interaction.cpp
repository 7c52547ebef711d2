#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "binary_io.hpp"
#include "gmmsum/error.hpp"
#include "gmmsum/interaction.hpp"
#include "gmmsum/service.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace gmmsum;

namespace {
Clustering random_labels(std::size_t n, std::size_t k, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(k - 1));
    std::vector<std::uint32_t> lab(n);
    for (std::size_t i = 0; i < k && i < n; ++i) lab[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = k; i < n; ++i) lab[i] = pick(rng);
    return Clustering::from_labels(lab);
}
}  // namespace

TEST_CASE("brush DOI equals the model probability of the range") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0), sd(0.3, 1.5);
    for (int trial = 0; trial < 20; ++trial) {
        oracle::Mix1 m;
        std::vector<GaussianComponent> comps;
        for (int j = 0; j < 1 + trial % 3; ++j) {
            m.w.push_back(1.0 + j);
            m.mu.push_back(u(rng));
            m.var.push_back(std::pow(sd(rng), 2));
            comps.emplace_back(m.w.back(), std::vector<double>{m.mu.back()}, Matrix{{m.var.back()}});
        }
        double tot = 0;
        for (double w : m.w) tot += w;
        for (double& w : m.w) w /= tot;
        Summary s;
        s.attributes = {{"pos", AttributeKind::position, 3}, {"v", AttributeKind::scalar, 1}};
        ClusterSummary cs;
        cs.sample_count = 10;
        cs.gmms.emplace(SubsetKey{3}, Gmm(comps));
        s.clusters.push_back(cs);
        s.n_total = 10;
        double a = u(rng), b = u(rng);
        if (a > b) std::swap(a, b);
        const auto doi = brush_doi(s, Brush{3, a, b});
        CHECK(doi[0] == doctest::Approx(oracle::mix1_cdf(m, b) - oracle::mix1_cdf(m, a)).epsilon(1e-12));
        CHECK(std::abs(doi[0] - oracle::mix1_mc_probability(m, a, b, 20000, trial)) < 2e-2);
    }
}

TEST_CASE("brush edge cases") {
    const Summary s = fixtures::consistent_summary(3, 1);
    for (double v : brush_doi(s, Brush{3, -1e9, 1e9})) CHECK(v == doctest::Approx(1.0));
    for (double v : brush_doi(s, Brush{3, 0.5, 0.5})) CHECK(v == 0.0);
    CHECK_THROWS_AS(brush_doi(s, Brush{7, 0, 1}), NotFound);
    CHECK_THROWS_AS(brush_doi(s, Brush{3, 1, 0}), InvalidArgument);
}

TEST_CASE("combining brushes") {
    const std::vector<DoiVector> parts{{0.2, 0.9, 0.5}, {0.6, 0.1, 0.5}};
    CHECK(combine_doi(parts, CombineMode::conjunction) == DoiVector{0.2, 0.1, 0.5});
    CHECK(combine_doi(parts, CombineMode::disjunction) == DoiVector{0.6, 0.9, 0.5});
    CHECK(parse_combine_mode("and") == CombineMode::conjunction);
    CHECK_THROWS_AS(parse_combine_mode("xor"), InvalidArgument);
    const std::vector<DoiVector> uneven{{0.1}, {0.1, 0.2}};
    CHECK_THROWS_AS(combine_doi(uneven, CombineMode::conjunction), DimensionMismatch);
    CHECK_THROWS_AS(validate_doi(std::vector<double>{1.5}), InvalidArgument);
}

TEST_CASE("transfer matrix rows are stochastic and entries are overlap fractions") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_labels(500, 4 + trial % 3, rng);
        const auto b = random_labels(500, 3 + trial % 5, rng);
        const auto m = build_transfer_matrix(a, b);
        CHECK(m.rows() == b.cluster_count());
        CHECK(m.cols() == a.cluster_count());
        for (double s : m.row_sums()) CHECK(std::abs(s - 1.0) <= 1e-12);
        for (std::size_t j = 0; j < b.cluster_count(); ++j)
            for (std::size_t l = 0; l < a.cluster_count(); ++l) {
                std::size_t both = 0;
                for (auto r : b.members(j)) both += a.labels()[r] == l ? 1 : 0;
                CHECK(m.at(j, l) == doctest::Approx(double(both) / b.members(j).size()));
            }
    }
}

TEST_CASE("matrix algebra") {
    std::mt19937_64 rng(4);
    const auto a = random_labels(300, 5, rng), b = random_labels(300, 4, rng), c = random_labels(300, 6, rng);
    const auto m1 = build_transfer_matrix(a, b), m2 = build_transfer_matrix(b, c);
    const auto m12 = m1.then(m2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DoiVector x(5);
    for (auto& v : x) v = u(rng);
    const auto two_step = m2.apply(m1.apply(x));
    const auto one_step = m12.apply(x);
    for (std::size_t i = 0; i < one_step.size(); ++i) CHECK(std::abs(two_step[i] - one_step[i]) <= 1e-12);
    CHECK(TransferMatrix::identity(5).apply(x) == x);
    CHECK_THROWS_AS(m2.then(m1).apply(x), DimensionMismatch);
    CHECK_THROWS_AS(TransferMatrix(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}), InvalidArgument);
    CHECK_THROWS_AS(TransferMatrix(2, 2, {{3, 0, 1.0}}), InvalidArgument);
}

TEST_CASE("all-ones DOI stays fixed along a chain") {
    std::mt19937_64 rng(6);
    std::vector<Clustering> frames;
    for (int t = 0; t < 5; ++t) frames.push_back(random_labels(400, 3 + t, rng));
    DoiVector doi(frames[0].cluster_count(), 1.0);
    for (int t = 0; t + 1 < 5; ++t) {
        doi = advance_doi(build_transfer_matrix(frames[t], frames[t + 1]), doi);
        for (double v : doi) CHECK(std::abs(v - 1.0) <= 1e-12);
    }
}

TEST_CASE("presence mask drops births") {
    const std::vector<std::uint32_t> a{0, 0, 1, 1}, b{0, 0, 0, 1};
    const std::vector<std::uint8_t> present{1, 1, 0, 1};
    const auto m = build_transfer_matrix(Clustering::from_labels(a), Clustering::from_labels(b), present);
    // cluster 0 at t+1 has one newborn member: its row sums to 2/3
    CHECK(m.row_sums()[0] == doctest::Approx(2.0 / 3.0));
    CHECK(m.row_sums()[1] == doctest::Approx(1.0));
}

TEST_CASE("backward DOI uses overlap over source size") {
    const std::vector<std::uint32_t> a{0, 0, 0, 1}, b{0, 1, 1, 1};
    const auto ca = Clustering::from_labels(a), cb = Clustering::from_labels(b);
    const auto m = build_transfer_matrix(ca, cb);
    Summary st, sn;
    st.attributes = sn.attributes = {{"pos", AttributeKind::position, 3}};
    for (std::size_t c = 0; c < 2; ++c) {
        ClusterSummary x;
        x.sample_count = ca.members(c).size();
        st.clusters.push_back(x);
        ClusterSummary y;
        y.sample_count = cb.members(c).size();
        sn.clusters.push_back(y);
    }
    const DoiVector next{1.0, 0.0};
    const auto back = retreat_doi(m, next, st, sn);
    // cluster 0 at t: one of its three members moves to cluster 0
    CHECK(back[0] == doctest::Approx(1.0 / 3.0));
    CHECK(back[1] == doctest::Approx(0.0));
}

TEST_CASE("transfer matrices round trip through JSON") {
    std::mt19937_64 rng(7);
    const auto a = random_labels(100, 3, rng), b = random_labels(100, 4, rng);
    const std::vector<TransferMatrix> ms{build_transfer_matrix(a, b), TransferMatrix::identity(4)};
    TempDir dir;
    save_transfer_matrices(ms, dir / "t.json");
    CHECK(load_transfer_matrices(dir / "t.json") == ms);
    detail::write_file_bytes(dir / "bad.json", "{\"version\":1}");
    CHECK_THROWS_AS(load_transfer_matrices(dir / "bad.json"), FormatError);
}
