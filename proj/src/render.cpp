#include "gmmsum/render.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "compress.hpp"
#include "gmmsum/error.hpp"
#include "gmmsum/linalg.hpp"
#include "parallel.hpp"

namespace gmmsum {

namespace {

void check_component(const GaussianComponent& g) {
    if (g.dim() != 3) throw DimensionMismatch("ray integration needs a 3D Gaussian");
}

void check_direction(Vec3 n) {
    if (!(std::abs(norm(n) - 1.0) <= 1e-9)) throw InvalidArgument("ray direction must be a unit vector");
}

}  // namespace

RayCoeffs ray_coeffs(const GaussianComponent& g, Vec3 o, Vec3 n) {
    check_component(g);
    check_direction(n);
    const Matrix& inv = g.inverse();
    const double d[3] = {o.x - g.mean()[0], o.y - g.mean()[1], o.z - g.mean()[2]};
    const double nv[3] = {n.x, n.y, n.z};
    double an = 0.0, bn = 0.0, qo = 0.0;
    for (int i = 0; i < 3; ++i) {
        double inv_n = 0.0, inv_d = 0.0;
        for (int j = 0; j < 3; ++j) {
            inv_n += inv(i, j) * nv[j];
            inv_d += inv(i, j) * d[j];
        }
        an += nv[i] * inv_n;
        bn += d[i] * inv_n;
        qo += d[i] * inv_d;
    }
    RayCoeffs rc;
    rc.a = 0.5 * an;
    rc.b = 0.5 * bn;
    // -qo/2 + b^2/a is the negated squared distance of the ray from the mean
    // and cannot be positive; rounding can make it so.
    const double exponent = std::min(0.0, -0.5 * qo + rc.b * rc.b / rc.a);
    rc.log_c = -0.5 * (3.0 * kLog2Pi + g.log_det()) + exponent;
    return rc;
}

double ray_integral_infinite(const GaussianComponent& g, Vec3 o, Vec3 n) {
    const RayCoeffs rc = ray_coeffs(g, o, n);
    return rc.c() * std::sqrt(kPi / rc.a);
}

double ray_integral_interval(const GaussianComponent& g, Vec3 o, Vec3 n, double t0, double t1) {
    if (std::isnan(t0) || std::isnan(t1)) throw InvalidArgument("interval bounds must not be NaN");
    if (t1 < t0) throw InvalidArgument("interval end lies before its start");
    const RayCoeffs rc = ray_coeffs(g, o, n);
    const double s = std::sqrt(rc.a);
    const double shift = rc.b / rc.a;
    const double x0 = std::isinf(t0) ? t0 : s * (t0 + shift);
    const double x1 = std::isinf(t1) ? t1 : s * (t1 + shift);
    double diff;  // erf(x1) - erf(x0)
    if (x0 >= 0.0) diff = std::erfc(x0) - std::erfc(x1);
    else if (x1 <= 0.0) diff = std::erfc(-x1) - std::erfc(-x0);
    else diff = std::erf(x1) - std::erf(x0);
    return std::max(0.0, rc.c() * std::sqrt(kPi) / s * 0.5 * diff);
}

bool OrientedBox::contains(Vec3 p, double slack) const {
    const Vec3 d = p - center;
    for (int k = 0; k < 3; ++k)
        if (std::abs(dot(d, axes[k])) > half_extents[k] * (1.0 + slack) + slack) return false;
    return true;
}

std::array<Vec3, 8> OrientedBox::corners() const {
    std::array<Vec3, 8> out;
    for (int i = 0; i < 8; ++i) {
        Vec3 p = center;
        for (int k = 0; k < 3; ++k) p = p + axes[k] * (((i >> k) & 1 ? 1.0 : -1.0) * half_extents[k]);
        out[i] = p;
    }
    return out;
}

OrientedBox gaussian_bbox(const GaussianComponent& g, double n_sigma) {
    check_component(g);
    if (!(n_sigma > 0.0)) throw InvalidArgument("n_sigma must be positive");
    const auto eig = symmetric_eigen(g.covariance());
    OrientedBox box;
    box.center = {g.mean()[0], g.mean()[1], g.mean()[2]};
    for (int k = 0; k < 3; ++k) {
        box.axes[k] = {eig.vectors(0, k), eig.vectors(1, k), eig.vectors(2, k)};
        box.half_extents[k] = n_sigma * std::sqrt(std::max(0.0, eig.values[k]));
    }
    return box;
}

TransferFunction::TransferFunction(std::vector<ControlPoint> points) : points_(std::move(points)) {
    if (points_.empty()) throw InvalidArgument("a transfer function needs at least one control point");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const auto& p = points_[i];
        if (!std::isfinite(p.value)) throw InvalidArgument("control values must be finite");
        for (double ch : {p.color.r, p.color.g, p.color.b, p.color.a})
            if (!(ch >= 0.0 && ch <= 1.0)) throw InvalidArgument("control colors must lie in [0, 1]");
        if (i > 0 && p.value < points_[i - 1].value) throw InvalidArgument("control values must be sorted");
    }
}

namespace {

Rgba lerp(const Rgba& a, const Rgba& b, double t) {
    return {a.r + t * (b.r - a.r), a.g + t * (b.g - a.g), a.b + t * (b.b - a.b), a.a + t * (b.a - a.a)};
}

Rgba scaled(const Rgba& c, double s) { return {c.r * s, c.g * s, c.b * s, c.a * s}; }

Rgba added(const Rgba& x, const Rgba& y) { return {x.r + y.r, x.g + y.g, x.b + y.b, x.a + y.a}; }

}  // namespace

Rgba TransferFunction::operator()(double x) const {
    const auto it = std::upper_bound(points_.begin(), points_.end(), x,
                                     [](double v, const ControlPoint& p) { return v < p.value; });
    if (it == points_.begin()) return points_.front().color;
    if (it == points_.end()) return points_.back().color;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double t = (x - lo.value) / (hi.value - lo.value);
    return lerp(lo.color, hi.color, t);
}

TransferFunction default_transfer_function(Extent e) {
    const double w = e.width();
    return TransferFunction({{e.lo, {0.07, 0.11, 0.45, 0.2}},
                             {e.lo + 0.35 * w, {0.13, 0.55, 0.55, 0.5}},
                             {e.lo + 0.7 * w, {0.55, 0.80, 0.25, 0.8}},
                             {e.hi, {0.99, 0.91, 0.15, 1.0}}});
}

Rgba convolve_tf(const TransferFunction& tf, double mean, double variance) {
    if (!(variance > 0.0)) throw InvalidArgument("variance must be positive");
    const double sd = std::sqrt(variance);
    const auto& pts = tf.points();
    // Mass and first moment of N(mean, sd) on [lo, hi].
    auto mass = [&](double lo, double hi) {
        const double zl = (lo - mean) / sd, zh = (hi - mean) / sd;
        if (zl >= 0.0) return normal_cdf(-zl) - normal_cdf(-zh);
        return normal_cdf(zh) - normal_cdf(zl);
    };
    auto density_diff = [&](double lo, double hi) {
        const double zl = (lo - mean) / sd, zh = (hi - mean) / sd;
        return normal_pdf(zl) - normal_pdf(zh);
    };
    Rgba out = scaled(pts.front().color, mass(-INFINITY, pts.front().value));
    out = added(out, scaled(pts.back().color, mass(pts.back().value, INFINITY)));
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double lo = pts[i].value, hi = pts[i + 1].value;
        if (!(hi > lo)) continue;
        const double m0 = mass(lo, hi);
        // integral of (x - lo) N dx over [lo, hi]
        const double m1 = (mean - lo) * m0 + sd * density_diff(lo, hi);
        const Rgba slope = scaled(added(pts[i + 1].color, scaled(pts[i].color, -1.0)), 1.0 / (hi - lo));
        out = added(out, added(scaled(pts[i].color, m0), scaled(slope, m1)));
    }
    out.r = std::clamp(out.r, 0.0, 1.0);
    out.g = std::clamp(out.g, 0.0, 1.0);
    out.b = std::clamp(out.b, 0.0, 1.0);
    out.a = std::clamp(out.a, 0.0, 1.0);
    return out;
}

TfLut::TfLut(const TransferFunction& tf, Extent mean_range, Extent var_range, std::size_t mean_res,
             std::size_t var_res)
    : mean_range_(mean_range), var_range_(var_range), mean_res_(mean_res), var_res_(var_res) {
    if (!(mean_range.hi > mean_range.lo)) throw InvalidArgument("mean range must have positive length");
    if (!(var_range.lo > 0.0) || !(var_range.hi > var_range.lo)) throw InvalidArgument("variance range must be positive");
    if (mean_res < 2 || var_res < 2) throw InvalidArgument("LUT resolution must be at least 2 x 2");
    table_.resize(mean_res * var_res);
    for (std::size_t j = 0; j < var_res; ++j)
        for (std::size_t i = 0; i < mean_res; ++i) table_[j * mean_res + i] = convolve_tf(tf, mean_at(i), variance_at(j));
}

double TfLut::mean_at(std::size_t i) const {
    return mean_range_.lo + mean_range_.width() * static_cast<double>(i) / static_cast<double>(mean_res_ - 1);
}

double TfLut::variance_at(std::size_t j) const {
    const double l0 = std::log(var_range_.lo), l1 = std::log(var_range_.hi);
    if (j + 1 == var_res_) return var_range_.hi;
    return std::exp(l0 + (l1 - l0) * static_cast<double>(j) / static_cast<double>(var_res_ - 1));
}

Rgba TfLut::lookup(double mean, double variance, bool* clamped) const {
    bool out_of_range = false;
    double fm = (mean - mean_range_.lo) / mean_range_.width() * static_cast<double>(mean_res_ - 1);
    const double l0 = std::log(var_range_.lo), l1 = std::log(var_range_.hi);
    double fv = variance > 0.0 ? (std::log(variance) - l0) / (l1 - l0) * static_cast<double>(var_res_ - 1) : -1.0;
    const double max_m = static_cast<double>(mean_res_ - 1), max_v = static_cast<double>(var_res_ - 1);
    if (!(fm >= 0.0 && fm <= max_m)) out_of_range = true;
    if (!(fv >= 0.0 && fv <= max_v)) out_of_range = true;
    fm = std::clamp(std::isnan(fm) ? 0.0 : fm, 0.0, max_m);
    fv = std::clamp(std::isnan(fv) ? 0.0 : fv, 0.0, max_v);
    if (clamped) *clamped = out_of_range;
    const auto i0 = std::min(static_cast<std::size_t>(fm), mean_res_ - 2);
    const auto j0 = std::min(static_cast<std::size_t>(fv), var_res_ - 2);
    const double tm = fm - static_cast<double>(i0), tv = fv - static_cast<double>(j0);
    const Rgba low = lerp(entry(i0, j0), entry(i0 + 1, j0), tm);
    const Rgba high = lerp(entry(i0, j0 + 1), entry(i0 + 1, j0 + 1), tm);
    return lerp(low, high, tv);
}

TfLut build_tf_lut(const TransferFunction& tf, Extent mean_range, Extent var_range, std::size_t mean_res,
                   std::size_t var_res) {
    return TfLut(tf, mean_range, var_range, mean_res, var_res);
}

Rgba expected_tf(const Gmm& gmm1, const TfLut& lut, std::size_t* clamp_count) {
    if (gmm1.dim() != 1) throw DimensionMismatch("expected_tf needs a one-dimensional GMM");
    Rgba out;
    for (const auto& g : gmm1.components()) {
        bool clamped = false;
        out = added(out, scaled(lut.lookup(g.mean()[0], g.covariance(0, 0), &clamped), g.weight()));
        if (clamped && clamp_count) ++*clamp_count;
    }
    return out;
}

void Camera::validate() const {
    if (!(vertical_fov > 0.0 && vertical_fov < kPi)) throw InvalidArgument("field of view must lie in (0, pi)");
    if (width == 0 || height == 0) throw InvalidArgument("image size must be positive");
    const Vec3 f = look_at - eye;
    if (!(norm(f) > 0.0)) throw InvalidArgument("camera eye and target coincide");
    if (!(norm(up) > 0.0) || norm(cross(normalized(f), normalized(up))) < 1e-9)
        throw InvalidArgument("camera up vector is parallel to the view direction");
    for (double v : {eye.x, eye.y, eye.z, look_at.x, look_at.y, look_at.z, up.x, up.y, up.z})
        if (!std::isfinite(v)) throw InvalidArgument("camera parameters must be finite");
}

namespace {

struct Basis {
    Vec3 f, r, u;
    double tan_half, aspect;
};

Basis camera_basis(const Camera& cam) {
    Basis b;
    b.f = normalized(cam.look_at - cam.eye);
    b.r = normalized(cross(b.f, cam.up));
    b.u = cross(b.r, b.f);
    b.tan_half = std::tan(0.5 * cam.vertical_fov);
    b.aspect = static_cast<double>(cam.width) / static_cast<double>(cam.height);
    return b;
}

}  // namespace

Vec3 Camera::ray_direction(std::size_t px, std::size_t py) const {
    const Basis b = camera_basis(*this);
    const double sx = (2.0 * (static_cast<double>(px) + 0.5) / static_cast<double>(width) - 1.0) * b.tan_half * b.aspect;
    const double sy = (1.0 - 2.0 * (static_cast<double>(py) + 0.5) / static_cast<double>(height)) * b.tan_half;
    return normalized(b.f + b.r * sx + b.u * sy);
}

bool Camera::project(Vec3 p, double& px, double& py) const {
    const Basis b = camera_basis(*this);
    const Vec3 d = p - eye;
    const double z = dot(d, b.f);
    if (!(z > 1e-9)) return false;
    const double sx = dot(d, b.r) / (z * b.tan_half * b.aspect);
    const double sy = dot(d, b.u) / (z * b.tan_half);
    px = (sx + 1.0) * 0.5 * static_cast<double>(width) - 0.5;
    py = (1.0 - sy) * 0.5 * static_cast<double>(height) - 0.5;
    return true;
}

TfLut lut_for_summary(const Summary& summary, const TransferFunction& tf, std::size_t color_dim) {
    Extent means{-1.0, 1.0};
    double vlo = INFINITY, vhi = 0.0;
    if (!summary.clusters.empty()) {
        means = default_extent(summary, color_dim);
        for (const auto& cs : summary.clusters)
            for (const auto& g : cs.gmm_1d(color_dim).components()) {
                vlo = std::min(vlo, g.covariance(0, 0));
                vhi = std::max(vhi, g.covariance(0, 0));
            }
    }
    if (!(vlo > 0.0) || !std::isfinite(vlo)) vlo = 1e-6;
    if (!(vhi > vlo)) vhi = vlo;
    return TfLut(tf, means, Extent{vlo / 4.0, vhi * 4.0}, 256, 128);
}

std::size_t default_color_dim(const Summary& summary) {
    const auto pos = summary.position_dims();
    for (std::size_t d = 0; d < summary.dimension_count(); ++d)
        if (std::find(pos.begin(), pos.end(), d) == pos.end()) return d;
    return 0;
}

Camera default_camera(const Summary& summary, std::size_t width, std::size_t height) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    Vec3 lo{INFINITY, INFINITY, INFINITY}, hi{-INFINITY, -INFINITY, -INFINITY};
    bool any = false;
    if (!summary.clusters.empty()) {
        const auto key = summary.position_key();
        for (const auto& cs : summary.clusters) {
            if (!cs.has(key)) continue;
            for (const auto& g : cs.gmm(key).components()) {
                any = true;
                for (int k = 0; k < 3; ++k) {
                    const double s = 3.0 * std::sqrt(g.covariance(k, k));
                    const double m = g.mean()[k];
                    double* l = k == 0 ? &lo.x : (k == 1 ? &lo.y : &lo.z);
                    double* h = k == 0 ? &hi.x : (k == 1 ? &hi.y : &hi.z);
                    *l = std::min(*l, m - s);
                    *h = std::max(*h, m + s);
                }
            }
        }
    }
    if (!any) return cam;
    const Vec3 center = (lo + hi) * 0.5;
    const double radius = std::max(1e-6, 0.5 * norm(hi - lo));
    cam.look_at = center;
    cam.eye = center + Vec3{0.0, 0.0, 1.15 * radius / std::sin(0.5 * cam.vertical_fov)};
    return cam;
}

std::vector<SplatRef> splat_order(const Summary& summary, const Camera& camera) {
    std::vector<SplatRef> refs;
    if (summary.clusters.empty()) return refs;
    const auto key = summary.position_key();
    for (std::size_t c = 0; c < summary.clusters.size(); ++c) {
        const auto& cs = summary.clusters[c];
        if (!cs.has(key)) continue;
        const auto& gmm = cs.gmm(key);
        for (std::size_t j = 0; j < gmm.size(); ++j) {
            const auto m = gmm[j].mean();
            refs.push_back({c, j, norm(Vec3{m[0], m[1], m[2]} - camera.eye)});
        }
    }
    std::stable_sort(refs.begin(), refs.end(), [](const SplatRef& a, const SplatRef& b) {
        if (a.distance != b.distance) return a.distance > b.distance;
        if (a.cluster != b.cluster) return a.cluster < b.cluster;
        return a.component < b.component;
    });
    return refs;
}

Rgba desaturate(const Rgba& color, double doi) {
    const double gray = 0.2126 * color.r + 0.7152 * color.g + 0.0722 * color.b;
    return {gray + doi * (color.r - gray), gray + doi * (color.g - gray), gray + doi * (color.b - gray), color.a};
}

RenderFrame splat_frame(const Summary& summary, const Camera& camera, const TfLut& lut, std::span<const double> doi,
                        const RenderOptions& options) {
    camera.validate();
    if (!(options.tone.gamma > 0.0)) throw InvalidArgument("tone-map gamma must be positive");
    if (!(options.n_sigma > 0.0)) throw InvalidArgument("n_sigma must be positive");
    if (!doi.empty() && doi.size() != summary.cluster_count())
        throw DimensionMismatch("DOI length differs from the cluster count");
    if (!summary.clusters.empty() && options.color_dim >= summary.dimension_count())
        throw NotFound("unknown color dimension " + std::to_string(options.color_dim));

    const std::size_t W = camera.width, H = camera.height;
    struct Splat {
        const GaussianComponent* g;
        double scale;
        Rgba color;
        long x0, x1, y0, y1;
    };
    std::vector<Splat> splats;
    const auto order = splat_order(summary, camera);
    if (!order.empty()) {
        const auto key = summary.position_key();
        std::vector<Rgba> cluster_color(summary.cluster_count());
        for (std::size_t c = 0; c < summary.cluster_count(); ++c) {
            const auto& cs = summary.clusters[c];
            const Rgba base = cs.has(SubsetKey{options.color_dim}) ? expected_tf(cs.gmm_1d(options.color_dim), lut)
                                                                    : Rgba{0.5, 0.5, 0.5, 1.0};
            cluster_color[c] = desaturate(base, doi.empty() ? 1.0 : doi[c]);
        }
        for (const auto& ref : order) {
            const auto& cs = summary.clusters[ref.cluster];
            const auto& g = cs.gmm(key)[ref.component];
            Splat s{&g, g.weight() * static_cast<double>(cs.sample_count) / static_cast<double>(summary.n_total),
                    cluster_color[ref.cluster], 0, static_cast<long>(W) - 1, 0, static_cast<long>(H) - 1};
            double min_x = INFINITY, max_x = -INFINITY, min_y = INFINITY, max_y = -INFINITY;
            bool behind = false;
            for (const Vec3& p : gaussian_bbox(g, options.n_sigma).corners()) {
                double px, py;
                if (!camera.project(p, px, py)) {
                    behind = true;
                    break;
                }
                min_x = std::min(min_x, px);
                max_x = std::max(max_x, px);
                min_y = std::min(min_y, py);
                max_y = std::max(max_y, py);
            }
            if (!behind) {
                const double lim_w = static_cast<double>(W), lim_h = static_cast<double>(H);
                s.x0 = static_cast<long>(std::ceil(std::clamp(min_x, -1.0, lim_w)));
                s.x1 = static_cast<long>(std::floor(std::clamp(max_x, -1.0, lim_w)));
                s.y0 = static_cast<long>(std::ceil(std::clamp(min_y, -1.0, lim_h)));
                s.y1 = static_cast<long>(std::floor(std::clamp(max_y, -1.0, lim_h)));
                s.x0 = std::max(0L, s.x0);
                s.y0 = std::max(0L, s.y0);
                s.x1 = std::min(static_cast<long>(W) - 1, s.x1);
                s.y1 = std::min(static_cast<long>(H) - 1, s.y1);
                if (s.x0 > s.x1 || s.y0 > s.y1) continue;
            }
            splats.push_back(s);
        }
    }

    RenderFrame frame;
    frame.width = W;
    frame.height = H;
    frame.camera = camera;
    frame.tone = options.tone;
    frame.accum.assign(W * H * 4, 0.0f);
    frame.rgba8.assign(W * H * 4, 0);

    constexpr std::size_t band = 16;
    const std::size_t bands = (H + band - 1) / band;
    detail::parallel_for(bands, 0, [&](std::size_t bi) {
        const std::size_t r0 = bi * band, r1 = std::min(H, r0 + band);
        std::vector<double> buf((r1 - r0) * W * 4);
        for (std::size_t i = 0; i < (r1 - r0) * W; ++i) {
            buf[4 * i + 0] = options.background.r;
            buf[4 * i + 1] = options.background.g;
            buf[4 * i + 2] = options.background.b;
            buf[4 * i + 3] = options.background.a;
        }
        for (const auto& s : splats) {
            const long ya = std::max<long>(s.y0, static_cast<long>(r0));
            const long yb = std::min<long>(s.y1, static_cast<long>(r1) - 1);
            for (long y = ya; y <= yb; ++y)
                for (long x = s.x0; x <= s.x1; ++x) {
                    const Vec3 n = camera.ray_direction(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
                    const double rho = s.scale * ray_integral_infinite(*s.g, camera.eye, n);
                    Rgba src = s.color;
                    src.a = s.color.a * tone_map(rho, options.tone);
                    composite_over(&buf[((static_cast<std::size_t>(y) - r0) * W + static_cast<std::size_t>(x)) * 4], src);
                }
        }
        for (const Vec3& p : options.outlier_points) {
            double px, py;
            if (!camera.project(p, px, py)) continue;
            const long x = std::lround(px), y = std::lround(py);
            if (x < 0 || x >= static_cast<long>(W) || y < static_cast<long>(r0) || y >= static_cast<long>(r1)) continue;
            composite_over(&buf[((static_cast<std::size_t>(y) - r0) * W + static_cast<std::size_t>(x)) * 4],
                           Rgba{0.85, 0.1, 0.1, 1.0});
        }
        for (std::size_t i = 0; i < (r1 - r0) * W * 4; ++i) {
            const float v = static_cast<float>(buf[i]);
            frame.accum[r0 * W * 4 + i] = v;
            frame.rgba8[r0 * W * 4 + i] =
                static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0));
        }
    });
    return frame;
}

ImageFormat image_format_for(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png") return ImageFormat::png;
    if (ext == ".ppm") return ImageFormat::ppm;
    throw InvalidArgument("unsupported image extension '" + ext + "' (use .ppm or .png)");
}

std::string encode_ppm(const RenderFrame& frame) {
    std::string out = "P6\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
    out.reserve(out.size() + frame.width * frame.height * 3);
    for (std::size_t i = 0; i < frame.width * frame.height; ++i)
        for (int c = 0; c < 3; ++c) out.push_back(static_cast<char>(frame.rgba8[4 * i + c]));
    return out;
}

namespace {

void put_u32_be(std::string& s, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) s.push_back(static_cast<char>((v >> shift) & 0xffu));
}

void put_chunk(std::string& png, const char* type, const std::string& data) {
    put_u32_be(png, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    png += body;
    put_u32_be(png, detail::crc32_of(body));
}

}  // namespace

std::string encode_png(const RenderFrame& frame) {
    std::string png("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(frame.width));
    put_u32_be(ihdr, static_cast<std::uint32_t>(frame.height));
    ihdr += std::string("\x08\x06\x00\x00\x00", 5);  // 8-bit RGBA, no interlace
    put_chunk(png, "IHDR", ihdr);
    std::string raw;
    raw.reserve(frame.height * (1 + frame.width * 4));
    for (std::size_t y = 0; y < frame.height; ++y) {
        raw.push_back('\0');
        raw.append(reinterpret_cast<const char*>(frame.rgba8.data() + y * frame.width * 4), frame.width * 4);
    }
    put_chunk(png, "IDAT", detail::deflate_bytes(raw, 15));
    put_chunk(png, "IEND", "");
    return png;
}

void write_image(const RenderFrame& frame, const std::filesystem::path& path, ImageFormat format) {
    if (frame.rgba8.size() != frame.width * frame.height * 4) throw InvalidArgument("frame buffer size mismatch");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    detail::write_file_bytes(path, format == ImageFormat::png ? encode_png(frame) : encode_ppm(frame));
}

RenderFrame decode_ppm(const std::string& bytes) {
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        return bytes.substr(start, pos - start);
    };
    if (token() != "P6") throw FormatError("not a binary PPM (P6) image");
    RenderFrame f;
    try {
        f.width = std::stoul(token());
        f.height = std::stoul(token());
        if (token() != "255") throw FormatError("only 8-bit PPM images are supported");
    } catch (const std::logic_error&) {
        throw FormatError("malformed PPM header");
    }
    ++pos;  // single whitespace before the raster
    if (bytes.size() - std::min(pos, bytes.size()) != f.width * f.height * 3)
        throw LengthMismatch("PPM raster size does not match its header");
    f.rgba8.resize(f.width * f.height * 4);
    for (std::size_t i = 0; i < f.width * f.height; ++i) {
        for (int c = 0; c < 3; ++c) f.rgba8[4 * i + c] = static_cast<std::uint8_t>(bytes[pos + 3 * i + c]);
        f.rgba8[4 * i + 3] = 255;
    }
    return f;
}

RenderFrame read_ppm(const std::filesystem::path& path) { return decode_ppm(detail::read_file_bytes(path)); }

}  // namespace gmmsum
