#pragma once

// Small datasets and hand-built summaries shared by several test binaries.

#include <cmath>
#include <cstring>
#include <random>

#include "gmmsum/dataset.hpp"
#include "gmmsum/render.hpp"
#include "gmmsum/summary.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace gmmsum;

// Three well separated blobs with a position attribute and two scalars.
inline Dataset blobs(std::size_t per_cluster, std::uint64_t seed, std::vector<std::uint32_t>* labels = nullptr) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::exponential_distribution<double> ex(1.0);
    const std::size_t n = 3 * per_cluster;
    std::vector<std::vector<double>> cols(5, std::vector<double>(n));
    if (labels) labels->resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i / per_cluster;
        for (int d = 0; d < 3; ++d) cols[d][i] = static_cast<float>(c * 12.0 + (1.0 + d * 0.5) * z(rng));
        cols[3][i] = static_cast<float>(c + (c == 1 ? (i % 2 ? 3.0 : -3.0) : 0.0) + 0.5 * z(rng));
        cols[4][i] = static_cast<float>(ex(rng));
        if (labels) (*labels)[i] = static_cast<std::uint32_t>(c);
    }
    return Dataset({{"pos", AttributeKind::position, 3}, {"temp", AttributeKind::scalar, 1}, {"age", AttributeKind::scalar, 1}},
                   cols);
}

inline Gmm gauss1(double mu, double var, double w = 1.0) {
    return Gmm({GaussianComponent(w, {mu}, Matrix{{var}})});
}

// Summary with one scalar attribute beyond position, built by hand so that
// every pair model is the exact marginal of the 3D model and of each other.
// Each cluster holds a single full-covariance Gaussian over all four dims.
inline Summary consistent_summary(std::size_t clusters, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-3.0, 3.0), s(0.4, 1.5);
    Summary sum;
    sum.attributes = {{"pos", AttributeKind::position, 3}, {"val", AttributeKind::scalar, 1}};
    for (std::size_t c = 0; c < clusters; ++c) {
        Matrix a(4, 4);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) a(i, j) = (i == j ? s(rng) : 0.3 * u(rng) / 3.0);
        const Matrix cov = a * a.transposed();
        std::vector<double> mu(4);
        for (auto& m : mu) m = u(rng);
        const Gmm full({GaussianComponent(1.0, mu, cov)});
        ClusterSummary cs;
        cs.id = static_cast<std::uint32_t>(c);
        cs.sample_count = 100 * (c + 1);
        for (const auto& key : full_key_set(sum.attributes)) cs.gmms.emplace(key, full.marginal(key.dims()));
        cs.wasserstein.assign(4, 0.0);
        cs.centroid = {mu[0], mu[1], mu[2]};
        sum.clusters.push_back(std::move(cs));
        sum.n_total += 100 * (c + 1);
    }
    return sum;
}

// Two single-Gaussian clusters at different depths along -z from the
// camera, plus a scalar attribute used for color.
struct Scene {
    Summary summary;
    Camera camera;
};

inline Scene two_gaussian_scene(std::size_t width, std::size_t height) {
    Scene sc;
    auto& s = sc.summary;
    s.attributes = {{"pos", AttributeKind::position, 3}, {"val", AttributeKind::scalar, 1}};
    const Matrix far_cov{{2.0, 0.5, 0.2}, {0.5, 1.0, 0.1}, {0.2, 0.1, 1.5}};
    const Matrix near_cov{{0.6, -0.2, 0.0}, {-0.2, 0.9, 0.3}, {0.0, 0.3, 0.4}};
    const std::vector<std::pair<std::vector<double>, Matrix>> parts{{{0.8, 0.3, -4.0}, far_cov},
                                                                    {{-0.5, -0.2, 2.0}, near_cov}};
    for (std::size_t c = 0; c < 2; ++c) {
        ClusterSummary cs;
        cs.id = static_cast<std::uint32_t>(c);
        cs.sample_count = c == 0 ? 600 : 400;
        cs.gmms.emplace(SubsetKey{0, 1, 2}, Gmm({GaussianComponent(1.0, parts[c].first, parts[c].second)}));
        cs.gmms.emplace(SubsetKey{3}, gauss1(c == 0 ? 0.2 : 0.8, 0.01));
        cs.wasserstein.assign(4, 0.0);
        s.clusters.push_back(std::move(cs));
    }
    s.n_total = 1000;
    sc.camera.eye = {0.0, 0.0, 12.0};
    sc.camera.look_at = {0.0, 0.0, 0.0};
    sc.camera.up = {0.0, 1.0, 0.0};
    sc.camera.vertical_fov = 0.7;
    sc.camera.width = width;
    sc.camera.height = height;
    return sc;
}

// Straight-alpha "over" compositing of the scene's two Gaussians, far one
// first, with every splat colored `color` and opacity color.a (1 - exp(-gamma rho)).
inline std::vector<float> hand_composite(const Scene& sc, Rgba color, double gamma, Rgba background) {
    const auto& cam = sc.camera;
    std::vector<float> out(cam.width * cam.height * 4);
    for (std::size_t y = 0; y < cam.height; ++y)
        for (std::size_t x = 0; x < cam.width; ++x) {
            const Vec3 d = cam.ray_direction(x, y);
            double px[4] = {background.r, background.g, background.b, background.a};
            for (std::size_t c = 0; c < 2; ++c) {
                const auto& cs = sc.summary.clusters[c];
                const auto& g = cs.gmm(SubsetKey{0, 1, 2})[0];
                const double rho = static_cast<double>(cs.sample_count) / static_cast<double>(sc.summary.n_total) *
                                   oracle::ray_integral_closed_form(g.mean(), g.covariance(), {cam.eye.x, cam.eye.y, cam.eye.z},
                                                                    {d.x, d.y, d.z});
                const double a = color.a * (1.0 - std::exp(-gamma * rho));
                px[0] = a * color.r + (1.0 - a) * px[0];
                px[1] = a * color.g + (1.0 - a) * px[1];
                px[2] = a * color.b + (1.0 - a) * px[2];
                px[3] = a + (1.0 - a) * px[3];
            }
            for (int k = 0; k < 4; ++k) out[(y * cam.width + x) * 4 + k] = static_cast<float>(px[k]);
        }
    return out;
}

// Distance in units in the last place between two floats of equal sign.
inline long float_ulps(float a, float b) {
    if (a == b) return 0;
    std::int32_t ia, ib;
    std::memcpy(&ia, &a, 4);
    std::memcpy(&ib, &b, 4);
    return std::abs(static_cast<long>(ia) - static_cast<long>(ib));
}

}  // namespace fixtures
