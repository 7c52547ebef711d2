#include "gmmsum/lod.hpp"

#include <algorithm>
#include <cmath>

#include "gmmsum/error.hpp"

namespace gmmsum {

std::vector<double> kde_bandwidths(const PointSet& samples, BandwidthRule rule) {
    const std::size_t n = samples.size(), d = samples.dim();
    if (n == 0) throw InvalidArgument("KDE needs at least one sample");
    std::vector<double> h(d);
    const double nd = static_cast<double>(n);
    const double dd = static_cast<double>(d);
    const double factor = rule == BandwidthRule::silverman ? std::pow(4.0 / ((dd + 2.0) * nd), 1.0 / (dd + 4.0))
                                                           : std::pow(nd, -1.0 / (dd + 4.0));
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += samples[i][c];
        mean /= nd;
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (samples[i][c] - mean) * (samples[i][c] - mean);
        var = n > 1 ? var / (nd - 1.0) : 0.0;
        h[c] = std::max(std::sqrt(var) * factor, 1e-6 * std::max(1.0, std::abs(mean)));
    }
    return h;
}

Gmm kde_model(const PointSet& samples, BandwidthRule rule) {
    const auto h = kde_bandwidths(samples, rule);
    const std::size_t d = samples.dim();
    std::vector<double> var(d);
    for (std::size_t c = 0; c < d; ++c) var[c] = h[c] * h[c];
    const Matrix cov = Matrix::diagonal(var);
    std::vector<GaussianComponent> comps;
    comps.reserve(samples.size());
    const double w = 1.0 / static_cast<double>(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        comps.emplace_back(w, std::vector<double>(samples[i].begin(), samples[i].end()), cov);
    return Gmm(std::move(comps));
}

LodSubstitution::LodSubstitution(const Dataset& dataset, const Clustering& clustering, std::vector<bool> substituted,
                                 BandwidthRule rule)
    : dataset_(&dataset), clustering_(&clustering), substituted_(std::move(substituted)), rule_(rule) {
    if (clustering.size() != dataset.size()) throw LengthMismatch("clustering does not match the dataset");
    if (substituted_.size() != clustering.cluster_count())
        throw DimensionMismatch("substitution mask length differs from the cluster count");
}

std::size_t LodSubstitution::substituted_count() const {
    return static_cast<std::size_t>(std::count(substituted_.begin(), substituted_.end(), true));
}

Gmm LodSubstitution::model(std::size_t cluster, const SubsetKey& key) const {
    if (cluster >= clustering_->cluster_count()) throw NotFound("cluster index out of range");
    return kde_model(dataset_->gather(clustering_->members(cluster), key.dims()), rule_);
}

LodSubstitution lod_substitute(const Summary& summary, std::span<const double> doi, double threshold,
                               const Dataset& dataset, const Clustering& clustering, BandwidthRule rule) {
    if (!(threshold >= 0.0)) throw InvalidArgument("LOD threshold must be non-negative");
    if (clustering.cluster_count() != summary.cluster_count())
        throw DimensionMismatch("raw clustering does not match the summary");
    if (dataset.size() != summary.n_total) throw LengthMismatch("raw dataset does not match the summary");
    if (!doi.empty() && doi.size() != summary.cluster_count())
        throw DimensionMismatch("DOI length differs from the cluster count");
    std::vector<bool> mask(summary.cluster_count(), false);
    for (std::size_t c = 0; c < mask.size(); ++c) {
        const double interest = doi.empty() ? 1.0 : doi[c];
        mask[c] = interest >= threshold;
    }
    return LodSubstitution(dataset, clustering, std::move(mask), rule);
}

}  // namespace gmmsum
