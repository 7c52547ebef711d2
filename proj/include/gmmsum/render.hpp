#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gmmsum/density.hpp"
#include "gmmsum/gmm.hpp"
#include "gmmsum/summary.hpp"

namespace gmmsum {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    Vec3 operator+(Vec3 o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(Vec3 o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    bool operator==(const Vec3&) const = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) { return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x}; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(Vec3 a) { return a * (1.0 / norm(a)); }

// Integrand along o + t n is c exp(-a (t + b/a)^2).
struct RayCoeffs {
    double a = 0.0;
    double b = 0.0;
    double log_c = 0.0;

    double c() const { return std::exp(log_c); }
};

// Requires a 3D component and |n| = 1 within 1e-9.
RayCoeffs ray_coeffs(const GaussianComponent& g, Vec3 o, Vec3 n);
double ray_integral_infinite(const GaussianComponent& g, Vec3 o, Vec3 n);
double ray_integral_interval(const GaussianComponent& g, Vec3 o, Vec3 n, double t0, double t1);

struct OrientedBox {
    Vec3 center;
    std::array<Vec3, 3> axes;           // orthonormal
    std::array<double, 3> half_extents; // along axes

    bool contains(Vec3 p, double slack = 1e-9) const;
    std::array<Vec3, 8> corners() const;
};

// Principal-axis box: axes are eigenvectors, half-extents n_sigma sqrt(lambda).
OrientedBox gaussian_bbox(const GaussianComponent& g, double n_sigma = 3.0);

struct Rgba {
    double r = 0.0, g = 0.0, b = 0.0, a = 0.0;

    bool operator==(const Rgba&) const = default;
};

// Piecewise-linear map from scalar value to RGBA, constant beyond the end
// points. Two control points at the same value form a step.
class TransferFunction {
public:
    struct ControlPoint {
        double value;
        Rgba color;
    };

    explicit TransferFunction(std::vector<ControlPoint> points);

    Rgba operator()(double x) const;
    const std::vector<ControlPoint>& points() const { return points_; }

private:
    std::vector<ControlPoint> points_;
};

// Dark blue to yellow over the extent, opacity rising from 0.2 to 1.
TransferFunction default_transfer_function(Extent extent);

// Expected TF value under N(mu, var), exact for a piecewise-linear TF.
Rgba convolve_tf(const TransferFunction& tf, double mean, double variance);

// Table over (mean, variance). The variance axis is logarithmic.
class TfLut {
public:
    TfLut(const TransferFunction& tf, Extent mean_range, Extent var_range, std::size_t mean_res, std::size_t var_res);

    // Bilinear read; arguments outside the ranges are clamped and reported.
    Rgba lookup(double mean, double variance, bool* clamped = nullptr) const;

    Extent mean_range() const { return mean_range_; }
    Extent var_range() const { return var_range_; }
    std::size_t mean_resolution() const { return mean_res_; }
    std::size_t var_resolution() const { return var_res_; }
    const Rgba& entry(std::size_t i_mean, std::size_t i_var) const { return table_[i_var * mean_res_ + i_mean]; }
    double mean_at(std::size_t i) const;
    double variance_at(std::size_t j) const;

private:
    Extent mean_range_, var_range_;
    std::size_t mean_res_, var_res_;
    std::vector<Rgba> table_;
};

TfLut build_tf_lut(const TransferFunction& tf, Extent mean_range, Extent var_range, std::size_t mean_res = 256,
                   std::size_t var_res = 128);

// sum_j w_j LUT(mu_j, sigma_j^2). clamp_count, if given, is increased by the
// number of components that fell outside the table.
Rgba expected_tf(const Gmm& gmm1, const TfLut& lut, std::size_t* clamp_count = nullptr);

struct Camera {
    Vec3 eye{0, 0, 10};
    Vec3 look_at{0, 0, 0};
    Vec3 up{0, 1, 0};
    double vertical_fov = 0.8;  // radians
    std::size_t width = 1920;
    std::size_t height = 1080;

    // Throws InvalidArgument for a degenerate setup.
    void validate() const;
    // Unit direction through the center of pixel (px, py); py grows downward.
    Vec3 ray_direction(std::size_t px, std::size_t py) const;
    // Continuous pixel coordinates of p (pixel centers at integers); false if
    // p is not in front of the camera.
    bool project(Vec3 p, double& px, double& py) const;
};

// LUT covering the color dimension's models: means over default_extent,
// variances over [min / 4, max * 4].
TfLut lut_for_summary(const Summary& summary, const TransferFunction& tf, std::size_t color_dim);
// First dimension outside the position attribute, 0 if there is none.
std::size_t default_color_dim(const Summary& summary);

// Looks at the summary's spatial envelope from the +z side.
Camera default_camera(const Summary& summary, std::size_t width, std::size_t height);

struct RenderOptions {
    double n_sigma = 3.0;
    Rgba background{1.0, 1.0, 1.0, 1.0};
    std::size_t color_dim = 0;
    ToneMapParams tone;
    // Optional per-cluster outlier samples drawn as small opaque splats.
    std::vector<Vec3> outlier_points;
};

struct RenderFrame {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgba8;  // row-major, top row first
    std::vector<float> accum;         // RGBA float32 composite
    Camera camera;
    ToneMapParams tone;

    bool operator==(const RenderFrame& o) const {
        return width == o.width && height == o.height && rgba8 == o.rgba8 && accum == o.accum;
    }
};

// Back-to-front splatting of every cluster's position GMM. Each component is
// weighted w_j |C| / N, integrated along the pixel ray, tone mapped and
// composited with "over". Color comes from the expected TF of the cluster's
// color_dim model, desaturated toward its luminance by 1 - doi.
RenderFrame splat_frame(const Summary& summary, const Camera& camera, const TfLut& lut,
                        std::span<const double> doi, const RenderOptions& options);

// Splat order: descending eye distance of the mean, then cluster, then component.
struct SplatRef {
    std::size_t cluster;
    std::size_t component;
    double distance;
};
std::vector<SplatRef> splat_order(const Summary& summary, const Camera& camera);

// One composite step of a straight-alpha color over dst.
inline void composite_over(double* dst, const Rgba& src) {
    dst[0] = src.a * src.r + (1.0 - src.a) * dst[0];
    dst[1] = src.a * src.g + (1.0 - src.a) * dst[1];
    dst[2] = src.a * src.b + (1.0 - src.a) * dst[2];
    dst[3] = src.a + (1.0 - src.a) * dst[3];
}

Rgba desaturate(const Rgba& color, double doi);

enum class ImageFormat { ppm, png };
ImageFormat image_format_for(const std::filesystem::path& path);

// P6 header "P6\n<w> <h>\n255\n" followed by RGB triples; alpha is dropped.
std::string encode_ppm(const RenderFrame& frame);
std::string encode_png(const RenderFrame& frame);
void write_image(const RenderFrame& frame, const std::filesystem::path& path, ImageFormat format);
// Alpha of the result is 255.
RenderFrame decode_ppm(const std::string& bytes);
RenderFrame read_ppm(const std::filesystem::path& path);

}  // namespace gmmsum
