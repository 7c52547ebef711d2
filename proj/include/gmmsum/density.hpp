#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gmmsum/gmm.hpp"
#include "gmmsum/lod.hpp"
#include "gmmsum/summary.hpp"

namespace gmmsum {

struct Extent {
    double lo = 0.0;
    double hi = 1.0;

    double width() const { return hi - lo; }
    bool operator==(const Extent&) const = default;
};

// Cell-centered grid. For two axes the values are row-major with axis 0 along
// a row: values[i1 * resolution[0] + i0].
struct DensityGrid {
    std::vector<std::size_t> dims;
    std::vector<Extent> extent;
    std::vector<std::size_t> resolution;
    std::vector<double> values;

    double cell_width(std::size_t axis) const {
        return extent[axis].width() / static_cast<double>(resolution[axis]);
    }
    double cell_center(std::size_t axis, std::size_t i) const {
        return extent[axis].lo + (static_cast<double>(i) + 0.5) * cell_width(axis);
    }
    double at(std::size_t i0, std::size_t i1 = 0) const { return values[i1 * resolution[0] + i0]; }
    double sum() const;
};

struct ToneMapParams {
    double gamma = 1.0;
};

// 1 - exp(-gamma rho)
double tone_map(double density, const ToneMapParams& params);

// Envelope of mu +- 3 sigma over all clusters' 1D models of dim.
Extent default_extent(const Summary& summary, std::size_t dim);

// An empty DOI span means interest 1 everywhere. A non-null lod replaces the
// models of its substituted clusters.
DensityGrid density_1d(const Summary& summary, std::size_t dim, Extent extent, std::size_t resolution,
                       std::span<const double> doi = {}, const LodSubstitution* lod = nullptr);

// Each Gaussian contributes only inside its 3-sigma Mahalanobis ellipse.
DensityGrid density_2d(const Summary& summary, std::size_t dim_x, std::size_t dim_y, Extent extent_x,
                       Extent extent_y, std::size_t width, std::size_t height, std::span<const double> doi = {},
                       const LodSubstitution* lod = nullptr);

// Density at y of X(u) = (1 - u) X_0 + u X_1 for a bivariate GMM.
double pcp_density(const Gmm& gmm2, double u, double y);

struct PcpImage {
    std::vector<std::size_t> axes;
    std::vector<Extent> extents;      // per axis
    std::vector<DensityGrid> panels;  // one per adjacent pair, width x height, u along a row
    std::size_t width = 0;
    std::size_t height = 0;

    // Panels side by side: height rows of (axes - 1) * width values.
    std::vector<double> assemble() const;
};

// Panel column c sits at u = c / (width - 1), row r at the cell center r of
// the normalized axis. Values are densities in the units of the left axis at
// u = 0 and of the right axis at u = 1, so the first column reproduces
// density_1d of the left axis over the same extent and resolution.
PcpImage pcp_image(const Summary& summary, std::span<const std::size_t> axes, std::size_t width, std::size_t height,
                   std::span<const double> doi = {}, std::span<const Extent> extents = {});

// Row t: density_1d of summary t integrated over each bin (midpoint rule).
std::vector<std::vector<double>> time_histogram(std::span<const Summary> summaries, std::size_t dim, std::size_t bins,
                                                Extent extent,
                                                std::span<const std::vector<double>> doi_per_t = {});

}  // namespace gmmsum
