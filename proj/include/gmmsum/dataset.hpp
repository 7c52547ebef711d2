#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gmmsum/point_set.hpp"

namespace gmmsum {

enum class AttributeKind { position, vector, scalar };

std::string to_string(AttributeKind kind);
AttributeKind parse_attribute_kind(const std::string& text);

struct AttributeSpec {
    std::string name;
    AttributeKind kind = AttributeKind::scalar;
    int components = 1;  // 3 for position/vector, 1 for scalar

    bool operator==(const AttributeSpec&) const = default;
};

// Linear dimension layout: attributes in declaration order, each
// contributing `components` consecutive dimensions.
class Dataset {
public:
    // columns[dim] holds the N values of linear dimension dim.
    Dataset(std::vector<AttributeSpec> attributes, std::vector<std::vector<double>> columns);

    std::size_t size() const { return n_; }
    std::size_t dimension_count() const { return columns_.size(); }
    const std::vector<AttributeSpec>& attributes() const { return attributes_; }
    std::span<const double> column(std::size_t dim) const;
    double value(std::size_t row, std::size_t dim) const { return columns_[dim][row]; }

    // Linear dims of attribute a.
    std::vector<std::size_t> attribute_dims(std::size_t a) const;
    std::vector<std::size_t> position_dims() const;
    std::string dimension_name(std::size_t dim) const;

    // Rows x dims gathered into a point set.
    PointSet gather(std::span<const std::uint32_t> rows, std::span<const std::size_t> dims) const;

    bool operator==(const Dataset&) const = default;

private:
    std::vector<AttributeSpec> attributes_;
    std::vector<std::vector<double>> columns_;
    std::size_t n_ = 0;
};

// Validates the attribute list: exactly one position attribute, component
// counts matching the kinds, unique names.
void validate_attributes(const std::vector<AttributeSpec>& attributes);
std::size_t linear_dimension_count(const std::vector<AttributeSpec>& attributes);
std::vector<std::size_t> attribute_dims(const std::vector<AttributeSpec>& attributes, std::size_t a);
std::string dimension_name(const std::vector<AttributeSpec>& attributes, std::size_t dim);

// Manifest: {"version":1,"n":N,"attributes":[{"name","kind","files":[...]}]}
// with one little-endian float32 file per component, paths relative to the
// manifest directory.
Dataset load_dataset(const std::filesystem::path& manifest);
void save_dataset(const Dataset& dataset, const std::filesystem::path& manifest);

class Clustering {
public:
    // Renumbers ids densely in ascending order of the original id.
    static Clustering from_labels(std::span<const std::int64_t> labels);
    static Clustering from_labels(std::span<const std::uint32_t> labels);

    std::size_t size() const { return labels_.size(); }
    std::size_t cluster_count() const { return members_.size(); }
    std::span<const std::uint32_t> labels() const { return labels_; }
    std::span<const std::uint32_t> members(std::size_t cluster) const { return members_.at(cluster); }

    bool operator==(const Clustering&) const = default;

private:
    std::vector<std::uint32_t> labels_;
    std::vector<std::vector<std::uint32_t>> members_;
};

// Labels file: little-endian uint32 per sample.
Clustering load_clustering(const std::filesystem::path& path, const Dataset& dataset);
Clustering load_clustering(const std::filesystem::path& path, std::size_t expected_size);
void save_clustering(const Clustering& clustering, const std::filesystem::path& path);

struct KMeansResult {
    Clustering clustering;
    std::vector<double> centers;          // k x |feature_dims|
    std::vector<double> objective_trace;  // sum of squared distances after each iteration
    int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding over the selected linear dims.
// Stops when no label changes or after max_iters iterations. Empty clusters
// are reseeded at the point farthest from its assigned center.
KMeansResult kmeans(const Dataset& dataset, std::size_t k, std::span<const std::size_t> feature_dims,
                    std::uint64_t seed, int max_iters = 100);
Clustering kmeans_cluster(const Dataset& dataset, std::size_t k, std::span<const std::size_t> feature_dims,
                          std::uint64_t seed);

struct SyntheticData {
    Dataset dataset;
    Clustering clustering;
    std::vector<std::uint8_t> noise_mask;  // 1 where the position was drawn uniformly
};

inline constexpr std::size_t kSyntheticClusters = 10;
inline constexpr std::size_t kSyntheticPoints = 100000;
inline constexpr std::size_t kSyntheticExponentialDim = 5;

// Ten clusters, 100,000 points, 9 dimensions: position (3) plus scalars
// gaussian, uniform, exponential, bimodal, correlated, constant.
SyntheticData generate_synthetic(std::uint64_t seed);

struct TimeSeries {
    std::vector<Dataset> datasets;
    std::vector<Clustering> clusterings;

    // Throws when frames disagree on the attribute list or on sizes.
    void validate() const;
    std::size_t frame_count() const { return datasets.size(); }
};

}  // namespace gmmsum
