#include "gmmsum/density.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gmmsum/error.hpp"
#include "parallel.hpp"

namespace gmmsum {

double DensityGrid::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

double tone_map(double density, const ToneMapParams& params) {
    if (!(params.gamma > 0.0)) throw InvalidArgument("tone-map gamma must be positive");
    if (!(density >= 0.0)) throw InvalidArgument("density must be non-negative");
    return -std::expm1(-params.gamma * density);
}

namespace {

void check_dim(const Summary& summary, std::size_t dim) {
    if (dim >= summary.dimension_count()) throw NotFound("unknown dimension " + std::to_string(dim));
}

void check_extent(Extent e) {
    if (!(e.hi > e.lo) || !std::isfinite(e.lo) || !std::isfinite(e.hi))
        throw InvalidArgument("extent must be finite with hi > lo");
}

std::vector<double> resolve_doi(const Summary& summary, std::span<const double> doi) {
    if (doi.empty()) return std::vector<double>(summary.cluster_count(), 1.0);
    if (doi.size() != summary.cluster_count()) throw DimensionMismatch("DOI length differs from the cluster count");
    return {doi.begin(), doi.end()};
}

double cluster_weight(const Summary& summary, const ClusterSummary& cs) {
    return static_cast<double>(cs.sample_count) / static_cast<double>(summary.n_total);
}

Gmm model_for(const Summary& summary, std::size_t c, const SubsetKey& key, const LodSubstitution* lod) {
    if (lod && lod->substituted(c)) return lod->model(c, key);
    return summary.clusters[c].gmm(key);
}

}  // namespace

Extent default_extent(const Summary& summary, std::size_t dim) {
    check_dim(summary, dim);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& cs : summary.clusters)
        for (const auto& g : cs.gmm_1d(dim).components()) {
            const double s = std::sqrt(g.covariance(0, 0));
            lo = std::min(lo, g.mean()[0] - 3.0 * s);
            hi = std::max(hi, g.mean()[0] + 3.0 * s);
        }
    if (!(hi > lo)) {
        const double mid = std::isfinite(lo) ? lo : 0.0;
        return {mid - 0.5, mid + 0.5};
    }
    return {lo, hi};
}

DensityGrid density_1d(const Summary& summary, std::size_t dim, Extent extent, std::size_t resolution,
                       std::span<const double> doi, const LodSubstitution* lod) {
    check_dim(summary, dim);
    check_extent(extent);
    if (resolution == 0) throw InvalidArgument("resolution must be positive");
    const auto interest = resolve_doi(summary, doi);
    DensityGrid grid{{dim}, {extent}, {resolution}, std::vector<double>(resolution, 0.0)};
    const SubsetKey key{dim};
    for (std::size_t c = 0; c < summary.cluster_count(); ++c) {
        const double scale = cluster_weight(summary, summary.clusters[c]) * interest[c];
        if (scale == 0.0) continue;
        const Gmm gmm = model_for(summary, c, key, lod);
        for (std::size_t i = 0; i < resolution; ++i) {
            const double x = grid.cell_center(0, i);
            grid.values[i] += scale * gmm_density(gmm, std::span<const double>(&x, 1));
        }
    }
    return grid;
}

DensityGrid density_2d(const Summary& summary, std::size_t dim_x, std::size_t dim_y, Extent extent_x,
                       Extent extent_y, std::size_t width, std::size_t height, std::span<const double> doi,
                       const LodSubstitution* lod) {
    check_dim(summary, dim_x);
    check_dim(summary, dim_y);
    if (dim_x == dim_y) throw InvalidArgument("density_2d needs two distinct dimensions");
    check_extent(extent_x);
    check_extent(extent_y);
    if (width == 0 || height == 0) throw InvalidArgument("resolution must be positive");
    const auto interest = resolve_doi(summary, doi);
    DensityGrid grid{{dim_x, dim_y}, {extent_x, extent_y}, {width, height}, {}};
    const SubsetKey key{dim_x, dim_y};
    const bool swapped = dim_x > dim_y;  // key coordinates are sorted

    const std::size_t clusters = summary.cluster_count();
    std::vector<std::vector<double>> partial(clusters);
    detail::parallel_for(clusters, 0, [&](std::size_t c) {
        const double scale = cluster_weight(summary, summary.clusters[c]) * interest[c];
        if (scale == 0.0) return;
        partial[c].assign(width * height, 0.0);
        const Gmm gmm = model_for(summary, c, key, lod);
        const double dx = grid.cell_width(0), dy = grid.cell_width(1);
        for (const auto& g : gmm.components()) {
            const std::size_t ix = swapped ? 1 : 0, iy = swapped ? 0 : 1;
            const double mx = g.mean()[ix], my = g.mean()[iy];
            const double sxx = g.covariance(ix, ix), syy = g.covariance(iy, iy);
            const double hx = 3.0 * std::sqrt(sxx), hy = 3.0 * std::sqrt(syy);
            const auto first = [](double v, double lo, double d) {
                return static_cast<long>(std::floor((v - lo) / d - 0.5));
            };
            const long x0 = std::max(0L, first(mx - hx, extent_x.lo, dx));
            const long x1 = std::min(static_cast<long>(width) - 1, first(mx + hx, extent_x.lo, dx) + 1);
            const long y0 = std::max(0L, first(my - hy, extent_y.lo, dy));
            const long y1 = std::min(static_cast<long>(height) - 1, first(my + hy, extent_y.lo, dy) + 1);
            const double w = scale * g.weight();
            double p[2];
            for (long yi = y0; yi <= y1; ++yi) {
                const double y = grid.cell_center(1, static_cast<std::size_t>(yi));
                for (long xi = x0; xi <= x1; ++xi) {
                    const double x = grid.cell_center(0, static_cast<std::size_t>(xi));
                    p[ix] = x;
                    p[iy] = y;
                    const double q = g.mahalanobis_sq(std::span<const double>(p, 2));
                    if (q > 9.0) continue;
                    partial[c][static_cast<std::size_t>(yi) * width + static_cast<std::size_t>(xi)] +=
                        w * std::exp(-0.5 * q - kLog2Pi - 0.5 * g.log_det());
                }
            }
        }
    });
    grid.values.assign(width * height, 0.0);
    for (const auto& part : partial)
        if (!part.empty())
            for (std::size_t i = 0; i < part.size(); ++i) grid.values[i] += part[i];
    return grid;
}

double pcp_density(const Gmm& gmm2, double u, double y) {
    if (gmm2.dim() != 2) throw DimensionMismatch("pcp_density needs a bivariate GMM");
    if (!(u >= 0.0 && u <= 1.0)) throw InvalidArgument("u must lie in [0, 1]");
    const double v = 1.0 - u;
    double s = 0.0;
    for (const auto& g : gmm2.components()) {
        const double mean = v * g.mean()[0] + u * g.mean()[1];
        const double var = v * v * g.covariance(0, 0) + 2.0 * u * v * g.covariance(1, 0) + u * u * g.covariance(1, 1);
        const double sd = std::sqrt(var);
        s += g.weight() * normal_pdf((y - mean) / sd) / sd;
    }
    return s;
}

std::vector<double> PcpImage::assemble() const {
    const std::size_t cols = panels.size() * width;
    std::vector<double> out(cols * height, 0.0);
    for (std::size_t p = 0; p < panels.size(); ++p)
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < width; ++c) out[r * cols + p * width + c] = panels[p].values[r * width + c];
    return out;
}

PcpImage pcp_image(const Summary& summary, std::span<const std::size_t> axes, std::size_t width, std::size_t height,
                   std::span<const double> doi, std::span<const Extent> extents) {
    if (axes.size() < 2) throw InvalidArgument("a parallel-coordinate plot needs at least two axes");
    if (width < 2 || height == 0) throw InvalidArgument("PCP resolution must be at least 2 x 1");
    if (!extents.empty() && extents.size() != axes.size()) throw DimensionMismatch("one extent per axis expected");
    for (std::size_t a : axes) check_dim(summary, a);
    const auto interest = resolve_doi(summary, doi);

    PcpImage img;
    img.axes.assign(axes.begin(), axes.end());
    img.width = width;
    img.height = height;
    for (std::size_t k = 0; k < axes.size(); ++k) {
        img.extents.push_back(extents.empty() ? default_extent(summary, axes[k]) : extents[k]);
        check_extent(img.extents.back());
    }

    for (std::size_t p = 0; p + 1 < axes.size(); ++p) {
        const std::size_t a = axes[p], b = axes[p + 1];
        if (a == b) throw InvalidArgument("adjacent PCP axes must differ");
        const Extent ea = img.extents[p], eb = img.extents[p + 1];
        const SubsetKey key{a, b};
        DensityGrid panel{{a, b}, {Extent{0.0, 1.0}, Extent{0.0, 1.0}}, {width, height},
                          std::vector<double>(width * height, 0.0)};
        for (std::size_t c = 0; c < summary.cluster_count(); ++c) {
            const auto& cs = summary.clusters[c];
            const double scale = cluster_weight(summary, cs) * interest[c];
            if (scale == 0.0) continue;
            if (!cs.has(key)) throw NotFound("no 2D model for axes " + key.str());
            // Reorder to (a, b) and normalize both axes to [0, 1].
            const Gmm& src = cs.gmm(key);
            const bool swapped = a > b;
            std::vector<GaussianComponent> comps;
            for (const auto& g : src.components()) {
                const std::size_t ia = swapped ? 1 : 0, ib = swapped ? 0 : 1;
                std::vector<double> mean = {(g.mean()[ia] - ea.lo) / ea.width(), (g.mean()[ib] - eb.lo) / eb.width()};
                Matrix cov{{g.covariance(ia, ia) / (ea.width() * ea.width()), g.covariance(ia, ib) / (ea.width() * eb.width())},
                           {g.covariance(ia, ib) / (ea.width() * eb.width()), g.covariance(ib, ib) / (eb.width() * eb.width())}};
                comps.emplace_back(g.weight(), std::move(mean), cov);
            }
            const Gmm normalized(std::move(comps));
            for (std::size_t col = 0; col < width; ++col) {
                const double u = static_cast<double>(col) / static_cast<double>(width - 1);
                const double span = (1.0 - u) * ea.width() + u * eb.width();
                for (std::size_t r = 0; r < height; ++r) {
                    const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(height);
                    panel.values[r * width + col] += scale * pcp_density(normalized, u, y) / span;
                }
            }
        }
        img.panels.push_back(std::move(panel));
    }
    return img;
}

std::vector<std::vector<double>> time_histogram(std::span<const Summary> summaries, std::size_t dim, std::size_t bins,
                                                Extent extent, std::span<const std::vector<double>> doi_per_t) {
    if (summaries.empty()) throw InvalidArgument("time histogram needs at least one timestep");
    if (!doi_per_t.empty() && doi_per_t.size() != summaries.size())
        throw DimensionMismatch("one DOI vector per timestep expected");
    for (const auto& s : summaries)
        if (s.attributes != summaries.front().attributes) throw FormatError("timesteps differ in their attribute schema");
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < summaries.size(); ++t) {
        const std::span<const double> doi = doi_per_t.empty() ? std::span<const double>() : doi_per_t[t];
        auto grid = density_1d(summaries[t], dim, extent, bins, doi);
        const double w = grid.cell_width(0);
        for (double& v : grid.values) v *= w;
        rows.push_back(std::move(grid.values));
    }
    return rows;
}

}  // namespace gmmsum
