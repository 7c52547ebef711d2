#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gmmsum/dataset.hpp"
#include "gmmsum/fitting.hpp"
#include "gmmsum/gmm.hpp"

namespace gmmsum {

// Sorted set of 1 to 3 linear dimension indices.
class SubsetKey {
public:
    SubsetKey() = default;
    explicit SubsetKey(std::vector<std::size_t> dims);  // sorts; throws on duplicates or bad size
    SubsetKey(std::initializer_list<std::size_t> dims) : SubsetKey(std::vector<std::size_t>(dims)) {}

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t size() const { return dims_.size(); }
    std::size_t operator[](std::size_t i) const { return dims_[i]; }

    // "3", "0|4", "0|1|2"
    std::string str() const;
    static SubsetKey parse(const std::string& text);

    auto operator<=>(const SubsetKey&) const = default;

private:
    std::vector<std::size_t> dims_;
};

struct ClusterSummary {
    std::uint32_t id = 0;
    std::size_t sample_count = 0;
    std::map<SubsetKey, Gmm> gmms;
    std::vector<double> wasserstein;  // indexed by linear dimension
    std::map<SubsetKey, std::vector<std::uint32_t>> outlier_order;  // dataset row ids, most outlying first
    std::array<double, 3> centroid{};

    const Gmm& gmm(const SubsetKey& key) const;
    const Gmm& gmm_1d(std::size_t dim) const { return gmm(SubsetKey{dim}); }
    bool has(const SubsetKey& key) const { return gmms.contains(key); }

    bool operator==(const ClusterSummary&) const = default;
};

struct Summary {
    std::vector<AttributeSpec> attributes;
    std::size_t n_total = 0;
    std::vector<ClusterSummary> clusters;
    FitConfig build_config;
    std::string provenance;  // hash of the source data

    std::size_t dimension_count() const { return linear_dimension_count(attributes); }
    std::size_t cluster_count() const { return clusters.size(); }
    std::vector<std::size_t> position_dims() const;
    // The 3D key of the position attribute.
    SubsetKey position_key() const { return SubsetKey(position_dims()); }

    bool operator==(const Summary&) const = default;
};

// Every key a complete summary holds: all 1D keys, all pairs, one 3D key per
// position or vector attribute.
std::vector<SubsetKey> full_key_set(const std::vector<AttributeSpec>& attributes);

using SubsetFilter = std::function<bool(const SubsetKey&)>;

struct BuildOptions {
    SubsetFilter subset_filter;     // applied to 2D/3D keys; 1D keys are always built
    bool compute_outliers = false;  // rank samples against the position GMM
    bool bounded_search = true;     // false: 2D/3D keys search 1..max_components
    bool compute_wasserstein = true;
    unsigned threads = 0;           // 0: one per hardware thread
};

// Fits every requested GMM for every cluster. 1D keys first (K in
// 1..max_components), then 3D keys and then pairs using component_bounds.
// Pairs inside a vector attribute are marginals of its 3D model.
Summary build_summary(const Dataset& dataset, const Clustering& clustering, const FitConfig& config,
                      const BuildOptions& options = {});

// Gzip-compressed JSON, version 1. Means and covariances are float32 values.
std::string serialize_summary(const Summary& summary);
Summary deserialize_summary(const std::string& bytes);
void save_summary(const Summary& summary, const std::filesystem::path& path);
Summary load_summary(const std::filesystem::path& path);

// FNV-1a over the attribute layout and raw column bits.
std::string dataset_fingerprint(const Dataset& dataset);

struct SummaryStats {
    std::size_t gmm_count = 0;
    double components_mean = 0.0;
    double components_std = 0.0;  // population
    double wasserstein_mean = 0.0;
    std::size_t byte_size = 0;
};

SummaryStats summary_stats(const Summary& summary);
// "GMM comp. 1.00 ± 0.00, Wasserstein dist. 0.0123, 45.6 KiB (10 clusters, 460 GMMs)"
std::string format_stats(const SummaryStats& stats, std::size_t cluster_count);

// Mean 1D Wasserstein distance per dimension over clusters.
std::vector<double> mean_wasserstein_per_dim(const Summary& summary);

// Per-cluster, per-dimension error table.
std::string error_report_json(const Summary& summary);
std::string error_report_csv(const Summary& summary);

// First ceil(p |C|) rows of the cluster's outlier ranking for the position key.
std::vector<std::uint32_t> take_outliers(const ClusterSummary& cluster, const SubsetKey& key, double p);

}  // namespace gmmsum
