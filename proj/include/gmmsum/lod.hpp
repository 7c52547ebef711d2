#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gmmsum/dataset.hpp"
#include "gmmsum/gmm.hpp"
#include "gmmsum/summary.hpp"

namespace gmmsum {

enum class BandwidthRule { silverman, scott };

// Per-dimension kernel bandwidths for n samples in d dimensions.
// Silverman: sigma_i (4 / ((d + 2) n))^(1 / (d + 4)); Scott: sigma_i n^(-1 / (d + 4)).
std::vector<double> kde_bandwidths(const PointSet& samples, BandwidthRule rule);

// Gaussian-kernel density estimate written as an equal-weight mixture with one
// diagonal component per sample.
Gmm kde_model(const PointSet& samples, BandwidthRule rule = BandwidthRule::silverman);

// Clusters whose model is replaced by a KDE over their raw samples.
class LodSubstitution {
public:
    LodSubstitution(const Dataset& dataset, const Clustering& clustering, std::vector<bool> substituted,
                    BandwidthRule rule = BandwidthRule::silverman);

    bool substituted(std::size_t cluster) const { return cluster < substituted_.size() && substituted_[cluster]; }
    std::size_t substituted_count() const;
    // KDE of the cluster's raw samples over the key's dimensions.
    Gmm model(std::size_t cluster, const SubsetKey& key) const;

private:
    const Dataset* dataset_;
    const Clustering* clustering_;
    std::vector<bool> substituted_;
    BandwidthRule rule_;
};

// Substitutes every cluster with doi >= threshold.
LodSubstitution lod_substitute(const Summary& summary, std::span<const double> doi, double threshold,
                               const Dataset& dataset, const Clustering& clustering,
                               BandwidthRule rule = BandwidthRule::silverman);

}  // namespace gmmsum
