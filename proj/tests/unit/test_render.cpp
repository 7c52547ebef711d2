#include <doctest.h>

#include <cmath>
#include <random>

#include "compress.hpp"
#include "fixtures.hpp"
#include "gmmsum/error.hpp"
#include "gmmsum/render.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace gmmsum;

namespace {
GaussianComponent random_component(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const Matrix cov = oracle::random_spd(rng, 3, 0.05, 4.0);
    return GaussianComponent(1.0, {u(rng), u(rng), u(rng)}, cov);
}

Vec3 to_vec(std::array<double, 3> a) { return {a[0], a[1], a[2]}; }

const TransferFunction& ramp() {
    static const TransferFunction tf({{0.0, {0.0, 0.0, 1.0, 0.1}}, {1.0, {1.0, 0.0, 0.0, 0.9}}, {1.0, {1.0, 1.0, 0.0, 0.9}},
                                      {2.0, {1.0, 1.0, 1.0, 1.0}}});
    return tf;
}
}  // namespace

TEST_CASE("ray integrals against quadrature") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-6.0, 6.0), span(0.0, 4.0);
    for (int i = 0; i < 150; ++i) {
        const auto g = random_component(rng);
        const std::array<double, 3> o{u(rng), u(rng), u(rng)};
        const auto n = oracle::random_unit(rng);
        const double inf = ray_integral_infinite(g, to_vec(o), to_vec(n));
        const double ref = oracle::ray_integral(g.mean(), g.covariance(), o, n, -INFINITY, INFINITY);
        CHECK(std::abs(inf - ref) <= 1e-6 * ref);
        const double t0 = u(rng), t1 = t0 + span(rng);
        const double part = ray_integral_interval(g, to_vec(o), to_vec(n), t0, t1);
        const double part_ref = oracle::ray_integral(g.mean(), g.covariance(), o, n, t0, t1);
        CHECK(std::abs(part - part_ref) <= 1e-6 * part_ref + 1e-300);
    }
}

TEST_CASE("standard normal spot values and additivity") {
    const GaussianComponent g(1.0, {0.0, 0.0, 0.0}, Matrix::identity(3));
    const Vec3 o{0, 0, 0}, n{0, 0, 1};
    CHECK(std::abs(ray_integral_infinite(g, o, n) - 1.0 / (2.0 * kPi)) < 1e-12);
    CHECK(std::abs(ray_integral_interval(g, o, n, 0.0, INFINITY) - 1.0 / (4.0 * kPi)) < 1e-12);
    CHECK(std::abs(ray_integral_interval(g, o, n, -INFINITY, INFINITY) - 1.0 / (2.0 * kPi)) < 1e-12);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        const auto h = random_component(rng);
        const auto dir = to_vec(oracle::random_unit(rng));
        double t[3] = {u(rng), u(rng), u(rng)};
        std::sort(t, t + 3);
        const double whole = ray_integral_interval(h, o, dir, t[0], t[2]);
        const double split = ray_integral_interval(h, o, dir, t[0], t[1]) + ray_integral_interval(h, o, dir, t[1], t[2]);
        CHECK(std::abs(whole - split) <= 1e-12 * std::max(1.0, whole));
    }
}

TEST_CASE("ray integral argument checks") {
    const GaussianComponent g(1.0, {0.0, 0.0, 0.0}, Matrix::identity(3));
    CHECK_THROWS_AS(ray_integral_infinite(g, {}, Vec3{0, 0, 2}), InvalidArgument);
    CHECK_THROWS_AS(ray_integral_interval(g, {}, Vec3{0, 0, 1}, 1.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(ray_integral_infinite(GaussianComponent(1.0, {0.0}, Matrix{{1.0}}), {}, Vec3{0, 0, 1}),
                    DimensionMismatch);
    // far from the Gaussian the result underflows to zero, never NaN
    const double tiny = ray_integral_infinite(g, Vec3{1e3, 0, 0}, Vec3{0, 0, 1});
    CHECK(tiny == 0.0);
}

TEST_CASE("oriented bounding box spans n sigma along the principal axes") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 50; ++i) {
        const auto g = random_component(rng);
        const auto box = gaussian_bbox(g, 3.0);
        const auto eig = symmetric_eigen(g.covariance());
        for (int k = 0; k < 3; ++k) {
            CHECK(box.half_extents[k] == doctest::Approx(3.0 * std::sqrt(eig.values[k])));
            const Vec3 tip = box.center + box.axes[k] * box.half_extents[k];
            CHECK(box.contains(tip));
            CHECK_FALSE(box.contains(box.center + box.axes[k] * (box.half_extents[k] * 1.01)));
        }
        // every point at Mahalanobis distance 3 lies in the box
        const auto d = oracle::random_unit(rng);
        const Matrix& l = g.cholesky();
        Vec3 p = box.center;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c <= r; ++c) {
                const double v = 3.0 * l(r, c) * d[c];
                if (r == 0) p.x += v;
                if (r == 1) p.y += v;
                if (r == 2) p.z += v;
            }
        CHECK(box.contains(p, 1e-9));
    }
}

TEST_CASE("transfer function evaluation and steps") {
    const auto& tf = ramp();
    CHECK(tf(-5.0) == Rgba{0.0, 0.0, 1.0, 0.1});
    CHECK(tf(0.5).r == doctest::Approx(0.5));
    CHECK(tf(1.0) == Rgba{1.0, 1.0, 0.0, 0.9});
    CHECK(tf(5.0) == Rgba{1.0, 1.0, 1.0, 1.0});
    CHECK_THROWS_AS(TransferFunction(std::vector<TransferFunction::ControlPoint>{}), InvalidArgument);
    using Points = std::vector<TransferFunction::ControlPoint>;
    CHECK_THROWS_AS(TransferFunction(Points{{1.0, {}}, {0.0, {}}}), InvalidArgument);
    CHECK_THROWS_AS(TransferFunction(Points{{0.0, {2.0, 0, 0, 0}}}), InvalidArgument);
}

TEST_CASE("convolved transfer function equals quadrature of the expectation") {
    const auto& tf = ramp();
    for (double mean : {-1.0, 0.3, 1.0, 2.5})
        for (double var : {1e-3, 0.05, 0.7}) {
            const Rgba got = convolve_tf(tf, mean, var);
            const double sd = std::sqrt(var);
            for (int ch = 0; ch < 4; ++ch) {
                auto channel = [&](double x) {
                    const Rgba c = tf(x);
                    const double v = ch == 0 ? c.r : ch == 1 ? c.g : ch == 2 ? c.b : c.a;
                    return v * std::exp(-0.5 * (x - mean) * (x - mean) / var) / (sd * std::sqrt(2.0 * kPi));
                };
                const double lo = mean - 15 * sd, hi = mean + 15 * sd;
                double ref = 0.0;
                // split at the control points so the integrand is smooth per piece
                std::vector<double> cuts{lo};
                for (const auto& p : tf.points())
                    if (p.value > lo && p.value < hi) cuts.push_back(p.value);
                cuts.push_back(hi);
                for (std::size_t k = 0; k + 1 < cuts.size(); ++k) ref += oracle::integrate(channel, cuts[k], cuts[k + 1]);
                const double v = ch == 0 ? got.r : ch == 1 ? got.g : ch == 2 ? got.b : got.a;
                CHECK(v == doctest::Approx(ref).epsilon(1e-9));
            }
        }
}

TEST_CASE("LUT reproduces nodes and reports clamping") {
    const TfLut lut(ramp(), Extent{-1.0, 3.0}, Extent{1e-3, 1.0}, 64, 32);
    for (std::size_t i : {0u, 17u, 63u})
        for (std::size_t j : {0u, 9u, 31u}) {
            bool clamped = true;
            const Rgba v = lut.lookup(lut.mean_at(i), lut.variance_at(j), &clamped);
            const Rgba e = convolve_tf(ramp(), lut.mean_at(i), lut.variance_at(j));
            CHECK(v.r == doctest::Approx(e.r).epsilon(1e-9));
            CHECK(v.a == doctest::Approx(e.a).epsilon(1e-9));
            CHECK_FALSE(clamped);
        }
    bool clamped = false;
    lut.lookup(10.0, 0.1, &clamped);
    CHECK(clamped);
    std::size_t count = 0;
    const Gmm g({GaussianComponent(0.5, {0.0}, Matrix{{0.1}}), GaussianComponent(0.5, {50.0}, Matrix{{0.1}})});
    const Rgba mix = expected_tf(g, lut, &count);
    CHECK(count == 1);
    const Rgba a = lut.lookup(0.0, 0.1), b = lut.lookup(50.0, 0.1);
    CHECK(mix.g == doctest::Approx(0.5 * a.g + 0.5 * b.g));
    CHECK_THROWS_AS(TfLut(ramp(), Extent{0, 1}, Extent{0.0, 1.0}, 8, 8), InvalidArgument);
}

TEST_CASE("camera projection inverts ray directions") {
    Camera cam;
    cam.eye = {3, 2, 9};
    cam.look_at = {0, 0, 0};
    cam.width = 64;
    cam.height = 48;
    for (std::size_t y = 0; y < 48; y += 7)
        for (std::size_t x = 0; x < 64; x += 5) {
            const Vec3 p = cam.eye + cam.ray_direction(x, y) * 7.0;
            double px, py;
            REQUIRE(cam.project(p, px, py));
            CHECK(px == doctest::Approx(static_cast<double>(x)).epsilon(1e-9));
            CHECK(py == doctest::Approx(static_cast<double>(y)).epsilon(1e-9));
        }
    double px, py;
    CHECK_FALSE(cam.project(cam.eye * 2.0, px, py));
    Camera bad = cam;
    bad.up = cam.look_at - cam.eye;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cam;
    bad.width = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("splatting matches hand compositing and is repeatable") {
    const auto sc = fixtures::two_gaussian_scene(48, 32);
    const Rgba color{0.9, 0.4, 0.2, 0.8};
    const TfLut lut(TransferFunction({{0.0, color}}), Extent{0.0, 1.0}, Extent{1e-3, 1.0}, 8, 8);
    RenderOptions opt;
    opt.n_sigma = 12.0;
    opt.color_dim = 3;
    opt.tone.gamma = 40.0;
    const auto frame = splat_frame(sc.summary, sc.camera, lut, {}, opt);
    const auto ref = fixtures::hand_composite(sc, color, 40.0, opt.background);
    long worst = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, fixtures::float_ulps(frame.accum[i], ref[i]));
    CHECK(worst <= 1);
    CHECK(splat_frame(sc.summary, sc.camera, lut, {}, opt) == frame);
    // something visible was drawn
    CHECK(*std::min_element(frame.rgba8.begin(), frame.rgba8.end()) < 200);
}

TEST_CASE("splat order is back to front") {
    const auto sc = fixtures::two_gaussian_scene(8, 8);
    const auto order = splat_order(sc.summary, sc.camera);
    REQUIRE(order.size() == 2);
    CHECK(order[0].cluster == 0);
    CHECK(order[0].distance > order[1].distance);
}

TEST_CASE("empty summaries render the background") {
    Summary empty;
    empty.attributes = {{"pos", AttributeKind::position, 3}};
    const TfLut lut = lut_for_summary(empty, default_transfer_function(Extent{0, 1}), 0);
    Camera cam = default_camera(empty, 5, 4);
    const auto f = splat_frame(empty, cam, lut, {}, RenderOptions{});
    for (auto v : f.rgba8) CHECK(v == 255);
}

TEST_CASE("DOI desaturates context clusters") {
    const Rgba c{1.0, 0.0, 0.0, 0.5};
    const Rgba g = desaturate(c, 0.0);
    CHECK(g.r == doctest::Approx(g.g));
    CHECK(g.g == doctest::Approx(g.b));
    CHECK(g.a == 0.5);
    CHECK(desaturate(c, 1.0) == c);
    const auto sc = fixtures::two_gaussian_scene(16, 16);
    const TfLut lut(default_transfer_function(Extent{0, 1}), Extent{0, 1}, Extent{1e-3, 1}, 16, 16);
    RenderOptions opt;
    opt.color_dim = 3;
    const std::vector<double> doi{0.0, 0.0};
    const auto gray = splat_frame(sc.summary, sc.camera, lut, doi, opt);
    for (std::size_t i = 0; i < gray.accum.size(); i += 4) {
        CHECK(gray.accum[i] == doctest::Approx(gray.accum[i + 1]).epsilon(1e-5));
    }
    const std::vector<double> wrong{1.0};
    CHECK_THROWS_AS(splat_frame(sc.summary, sc.camera, lut, wrong, opt), DimensionMismatch);
}

TEST_CASE("PPM golden bytes and round trip") {
    RenderFrame f;
    f.width = 1;
    f.height = 1;
    f.rgba8 = {10, 20, 30, 255};
    const std::string ppm = encode_ppm(f);
    CHECK(ppm == std::string("P6\n1 1\n255\n\x0a\x14\x1e", 14));
    f.width = 2;
    f.rgba8 = {255, 0, 0, 255, 0, 0, 255, 128};
    const std::string two = encode_ppm(f);
    CHECK(two == std::string("P6\n2 1\n255\n\xff\x00\x00\x00\x00\xff", 17));
    const auto back = decode_ppm(two);
    CHECK(back.width == 2);
    CHECK(back.rgba8 == std::vector<std::uint8_t>{255, 0, 0, 255, 0, 0, 255, 255});
    CHECK_THROWS_AS(decode_ppm("P3\n1 1\n255\n"), FormatError);
    CHECK_THROWS_AS(decode_ppm(two.substr(0, 15)), LengthMismatch);
}

TEST_CASE("PNG encoding carries the raster") {
    RenderFrame f;
    f.width = 3;
    f.height = 2;
    for (int i = 0; i < 24; ++i) f.rgba8.push_back(static_cast<std::uint8_t>(i * 10));
    const std::string png = encode_png(f);
    CHECK(png.substr(0, 8) == std::string("\x89PNG\r\n\x1a\n", 8));
    CHECK(png.substr(12, 4) == "IHDR");
    const std::size_t idat = png.find("IDAT");
    REQUIRE(idat != std::string::npos);
    const std::uint32_t len = (std::uint8_t(png[idat - 4]) << 24) | (std::uint8_t(png[idat - 3]) << 16) |
                              (std::uint8_t(png[idat - 2]) << 8) | std::uint8_t(png[idat - 1]);
    const std::string raw = detail::inflate_bytes(png.substr(idat + 4, len), 15);
    REQUIRE(raw.size() == 2 * (1 + 12));
    CHECK(raw[0] == 0);
    CHECK(static_cast<std::uint8_t>(raw[1 + 5]) == 50);
    CHECK(png.substr(png.size() - 8, 4) == "IEND");
    TempDir dir;
    write_image(f, dir / "x.png", image_format_for(dir / "x.png"));
    CHECK(std::filesystem::file_size(dir / "x.png") == png.size());
    CHECK_THROWS_AS(image_format_for("x.jpg"), InvalidArgument);
}
