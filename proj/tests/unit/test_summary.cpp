#include <doctest.h>

#include <cmath>
#include <thread>

#include "compress.hpp"
#include "fixtures.hpp"
#include "gmmsum/error.hpp"
#include "gmmsum/metrics.hpp"
#include "gmmsum/summary.hpp"
#include "temp_dir.hpp"

using namespace gmmsum;

namespace {
struct Built {
    Dataset data;
    Clustering clustering;
    Summary summary;
};

const Built& built() {
    static const Built b = [] {
        std::vector<std::uint32_t> labels;
        Dataset d = fixtures::blobs(150, 4, &labels);
        Clustering c = Clustering::from_labels(labels);
        FitConfig cfg;
        cfg.max_components = 3;
        cfg.seed = 11;
        BuildOptions opt;
        opt.compute_outliers = true;
        opt.threads = 1;
        Summary s = build_summary(d, c, cfg, opt);
        return Built{std::move(d), std::move(c), std::move(s)};
    }();
    return b;
}
}  // namespace

TEST_CASE("subset keys") {
    const SubsetKey k{4, 1};
    CHECK(k.str() == "1|4");
    CHECK(SubsetKey::parse("1|4") == k);
    CHECK(SubsetKey::parse("0|1|2").size() == 3);
    CHECK_THROWS(SubsetKey({1, 1}));
    CHECK_THROWS(SubsetKey(std::vector<std::size_t>{}));
    CHECK_THROWS(SubsetKey({0, 1, 2, 3}));
    CHECK_THROWS(SubsetKey::parse("a|b"));
}

TEST_CASE("full key set counts") {
    const std::vector<AttributeSpec> attrs{{"pos", AttributeKind::position, 3},
                                           {"vel", AttributeKind::vector, 3},
                                           {"t", AttributeKind::scalar, 1}};
    const auto keys = full_key_set(attrs);
    // 7 singles, 21 pairs, 2 triples
    CHECK(keys.size() == 7 + 21 + 2);
}

TEST_CASE("built summary holds every key and sensible models") {
    const auto& b = built();
    const auto& s = b.summary;
    CHECK(s.cluster_count() == 3);
    CHECK(s.n_total == b.data.size());
    const auto keys = full_key_set(s.attributes);
    for (const auto& cs : s.clusters) {
        CHECK(cs.gmms.size() == keys.size());
        for (const auto& k : keys) {
            REQUIRE(cs.has(k));
            CHECK(cs.gmm(k).dim() == k.size());
            CHECK(static_cast<int>(cs.gmm(k).size()) <= 9);
        }
        CHECK(cs.sample_count == 150);
    }
    CHECK_THROWS_AS(s.clusters[0].gmm(SubsetKey{0, 4, 3}), NotFound);
    // bimodal scalar of the middle cluster needs two components
    CHECK(s.clusters[1].gmm_1d(3).size() >= 2);
}

TEST_CASE("position pairs are marginals of the position model") {
    const auto& s = built().summary;
    for (const auto& cs : s.clusters) {
        const Gmm& g3 = cs.gmm(s.position_key());
        const std::vector<std::size_t> coords{0, 2};
        const Gmm m = g3.marginal(coords);
        const Gmm& g2 = cs.gmm(SubsetKey{0, 2});
        REQUIRE(g2.size() == m.size());
        for (std::size_t j = 0; j < m.size(); ++j) {
            CHECK(g2[j].mean()[0] == doctest::Approx(m[j].mean()[0]).epsilon(1e-6));
            CHECK(g2[j].covariance(0, 1) == doctest::Approx(m[j].covariance(0, 1)).epsilon(1e-5));
        }
    }
}

TEST_CASE("stored Wasserstein distances match a recomputation") {
    const auto& b = built();
    for (std::size_t c = 0; c < b.summary.cluster_count(); ++c) {
        const auto rows = b.clustering.members(c);
        for (std::size_t d = 0; d < b.data.dimension_count(); ++d) {
            std::vector<double> xs;
            for (auto r : rows) xs.push_back(b.data.value(r, d));
            const double w = wasserstein_1d(EmpiricalCdf(xs), b.summary.clusters[c].gmm_1d(d));
            CHECK(b.summary.clusters[c].wasserstein[d] == doctest::Approx(w).epsilon(1e-9));
        }
    }
}

TEST_CASE("serialization round trips exactly") {
    const auto& s = built().summary;
    const std::string bytes = serialize_summary(s);
    CHECK(bytes.size() > 18);
    CHECK(static_cast<unsigned char>(bytes[0]) == 0x1f);
    CHECK(static_cast<unsigned char>(bytes[1]) == 0x8b);
    const Summary back = deserialize_summary(bytes);
    CHECK(back == s);
    CHECK(serialize_summary(back) == bytes);
    TempDir dir;
    save_summary(s, dir / "a.gmms");
    CHECK(load_summary(dir / "a.gmms") == s);
}

TEST_CASE("corrupt and foreign files are rejected") {
    const std::string bytes = serialize_summary(built().summary);
    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x55;
    CHECK_THROWS_AS(deserialize_summary(flipped), FormatError);
    CHECK_THROWS_AS(deserialize_summary(bytes.substr(0, bytes.size() - 9)), FormatError);
    const std::string v2 = detail::deflate_bytes(R"({"format":"gmmsum-summary","version":2})", 31, 9);
    CHECK_THROWS_AS(deserialize_summary(v2), VersionError);
    const std::string other = detail::deflate_bytes(R"({"hello":1})", 31, 9);
    CHECK_THROWS_AS(deserialize_summary(other), FormatError);
}

TEST_CASE("build is deterministic across thread counts") {
    const auto& b = built();
    FitConfig cfg;
    cfg.max_components = 3;
    cfg.seed = 11;
    BuildOptions opt;
    opt.compute_outliers = true;
    opt.threads = 3;
    const Summary again = build_summary(b.data, b.clustering, cfg, opt);
    CHECK(serialize_summary(again) == serialize_summary(b.summary));
}

TEST_CASE("subset filter and skipped metrics") {
    const auto& b = built();
    FitConfig cfg;
    cfg.max_components = 2;
    BuildOptions opt;
    opt.subset_filter = [](const SubsetKey& k) { return k.size() == 1; };
    opt.compute_wasserstein = false;
    const Summary s = build_summary(b.data, b.clustering, cfg, opt);
    for (const auto& cs : s.clusters) {
        CHECK(cs.gmms.size() == 5);
        CHECK(cs.outlier_order.empty());
    }
}

TEST_CASE("outlier lists are dataset rows of the cluster, most outlying first") {
    const auto& b = built();
    const auto& cs = b.summary.clusters[2];
    const auto key = b.summary.position_key();
    const auto& order = cs.outlier_order.at(key);
    CHECK(order.size() == 150);
    for (auto r : order) CHECK(b.clustering.labels()[r] == 2);
    const auto top = take_outliers(cs, key, 0.1);
    CHECK(top.size() == 15);
    CHECK(std::equal(top.begin(), top.end(), order.begin()));
}

TEST_CASE("stats of single-component summaries") {
    const Summary s = fixtures::consistent_summary(4, 1);
    const auto st = summary_stats(s);
    CHECK(st.components_mean == 1.0);
    CHECK(st.components_std == 0.0);
    CHECK(st.gmm_count == 4 * (4 + 6 + 1));
    CHECK(format_stats(st, 4).rfind("GMM comp. 1.00 ± 0.00", 0) == 0);
}

TEST_CASE("error reports list every cluster and dimension") {
    const auto& s = built().summary;
    const std::string csv = error_report_csv(s);
    CHECK(csv.rfind("cluster,dim,name,components,count,wasserstein\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 5);
    const auto per_dim = mean_wasserstein_per_dim(s);
    CHECK(per_dim.size() == 5);
    CHECK(error_report_json(s).find("\"wasserstein\"") != std::string::npos);
}

TEST_CASE("dataset fingerprint") {
    const auto& b = built();
    CHECK(dataset_fingerprint(b.data) == dataset_fingerprint(b.data));
    CHECK(dataset_fingerprint(b.data) != dataset_fingerprint(fixtures::blobs(150, 5)));
    CHECK(b.summary.provenance == dataset_fingerprint(b.data));
}

TEST_CASE("mismatched clustering is rejected") {
    const auto& b = built();
    const std::vector<std::uint32_t> lab(10, 0);
    CHECK_THROWS_AS(build_summary(b.data, Clustering::from_labels(lab), FitConfig{}), LengthMismatch);
}
