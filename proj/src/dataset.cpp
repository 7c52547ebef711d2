#include "gmmsum/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "binary_io.hpp"
#include "gmmsum/error.hpp"
#include "gmmsum/gmm.hpp"
#include "gmmsum/linalg.hpp"

namespace gmmsum {

using nlohmann::json;

std::string to_string(AttributeKind kind) {
    switch (kind) {
        case AttributeKind::position: return "position";
        case AttributeKind::vector: return "vector";
        case AttributeKind::scalar: return "scalar";
    }
    return "scalar";
}

AttributeKind parse_attribute_kind(const std::string& text) {
    if (text == "position") return AttributeKind::position;
    if (text == "vector") return AttributeKind::vector;
    if (text == "scalar") return AttributeKind::scalar;
    throw FormatError("unknown attribute kind '" + text + "'");
}

void validate_attributes(const std::vector<AttributeSpec>& attributes) {
    int positions = 0;
    std::set<std::string> names;
    for (const auto& a : attributes) {
        if (a.name.empty()) throw FormatError("attribute names must not be empty");
        if (!names.insert(a.name).second) throw FormatError("duplicate attribute name '" + a.name + "'");
        const int expected = a.kind == AttributeKind::scalar ? 1 : 3;
        if (a.components != expected)
            throw FormatError("attribute '" + a.name + "' has " + std::to_string(a.components) + " components, expected " +
                              std::to_string(expected));
        positions += a.kind == AttributeKind::position ? 1 : 0;
    }
    if (positions != 1) throw FormatError("a dataset needs exactly one position attribute");
}

std::size_t linear_dimension_count(const std::vector<AttributeSpec>& attributes) {
    std::size_t m = 0;
    for (const auto& a : attributes) m += static_cast<std::size_t>(a.components);
    return m;
}

std::vector<std::size_t> attribute_dims(const std::vector<AttributeSpec>& attributes, std::size_t a) {
    if (a >= attributes.size()) throw NotFound("attribute index out of range");
    std::size_t offset = 0;
    for (std::size_t i = 0; i < a; ++i) offset += static_cast<std::size_t>(attributes[i].components);
    std::vector<std::size_t> dims(static_cast<std::size_t>(attributes[a].components));
    std::iota(dims.begin(), dims.end(), offset);
    return dims;
}

std::string dimension_name(const std::vector<AttributeSpec>& attributes, std::size_t dim) {
    std::size_t offset = 0;
    for (const auto& a : attributes) {
        const auto c = static_cast<std::size_t>(a.components);
        if (dim < offset + c) {
            if (c == 1) return a.name;
            static const char* axes[] = {"x", "y", "z"};
            return a.name + "." + axes[dim - offset];
        }
        offset += c;
    }
    throw NotFound("dimension " + std::to_string(dim) + " out of range");
}

Dataset::Dataset(std::vector<AttributeSpec> attributes, std::vector<std::vector<double>> columns)
    : attributes_(std::move(attributes)), columns_(std::move(columns)) {
    validate_attributes(attributes_);
    if (columns_.size() != linear_dimension_count(attributes_))
        throw LengthMismatch("column count does not match the attribute layout");
    n_ = columns_.front().size();
    for (std::size_t d = 0; d < columns_.size(); ++d) {
        if (columns_[d].size() != n_) throw LengthMismatch("columns differ in length");
        for (std::size_t i = 0; i < n_; ++i)
            if (!std::isfinite(columns_[d][i])) {
                std::size_t offset = 0;
                std::string name;
                for (const auto& a : attributes_) {
                    if (d < offset + static_cast<std::size_t>(a.components)) {
                        name = a.name;
                        break;
                    }
                    offset += static_cast<std::size_t>(a.components);
                }
                throw NonFiniteValue(name, i);
            }
    }
}

std::span<const double> Dataset::column(std::size_t dim) const {
    if (dim >= columns_.size()) throw NotFound("dimension " + std::to_string(dim) + " out of range");
    return columns_[dim];
}

std::vector<std::size_t> Dataset::attribute_dims(std::size_t a) const { return gmmsum::attribute_dims(attributes_, a); }

std::vector<std::size_t> Dataset::position_dims() const {
    for (std::size_t a = 0; a < attributes_.size(); ++a)
        if (attributes_[a].kind == AttributeKind::position) return attribute_dims(a);
    throw NotFound("dataset has no position attribute");
}

std::string Dataset::dimension_name(std::size_t dim) const { return gmmsum::dimension_name(attributes_, dim); }

PointSet Dataset::gather(std::span<const std::uint32_t> rows, std::span<const std::size_t> dims) const {
    for (std::size_t d : dims)
        if (d >= columns_.size()) throw NotFound("dimension " + std::to_string(d) + " out of range");
    std::vector<double> values;
    values.reserve(rows.size() * dims.size());
    for (std::uint32_t r : rows) {
        if (r >= n_) throw InvalidArgument("row index out of range");
        for (std::size_t d : dims) values.push_back(columns_[d][r]);
    }
    return PointSet(dims.size(), std::move(values));
}

Dataset load_dataset(const std::filesystem::path& manifest) {
    json doc;
    try {
        doc = json::parse(detail::read_file_bytes(manifest));
    } catch (const json::exception& e) {
        throw FormatError(manifest.string() + ": " + e.what());
    }
    try {
        if (doc.contains("version") && doc.at("version").get<int>() != 1)
            throw VersionError("unsupported dataset manifest version");
        const auto n = doc.at("n").get<std::size_t>();
        const auto base = manifest.parent_path();
        std::vector<AttributeSpec> attributes;
        std::vector<std::vector<double>> columns;
        for (const auto& a : doc.at("attributes")) {
            AttributeSpec spec;
            spec.name = a.at("name").get<std::string>();
            spec.kind = parse_attribute_kind(a.at("kind").get<std::string>());
            const auto& files = a.at("files");
            spec.components = static_cast<int>(files.size());
            attributes.push_back(spec);
            for (const auto& f : files) {
                const auto path = base / f.get<std::string>();
                const auto raw = detail::read_le_array<float>(path);
                if (raw.size() != n)
                    throw LengthMismatch(path.string() + ": expected " + std::to_string(n) + " values, found " +
                                         std::to_string(raw.size()));
                std::vector<double> col(raw.begin(), raw.end());
                for (std::size_t i = 0; i < n; ++i)
                    if (!std::isfinite(col[i])) throw NonFiniteValue(spec.name, i);
                columns.push_back(std::move(col));
            }
        }
        if (columns.empty()) throw FormatError("manifest declares no attributes");
        return Dataset(std::move(attributes), std::move(columns));
    } catch (const json::exception& e) {
        throw FormatError(manifest.string() + ": " + e.what());
    }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& manifest) {
    const auto base = manifest.parent_path();
    if (!base.empty()) std::filesystem::create_directories(base);
    const std::string stem = manifest.stem().string();
    json doc;
    doc["version"] = 1;
    doc["n"] = dataset.size();
    doc["attributes"] = json::array();
    std::size_t dim = 0;
    for (const auto& a : dataset.attributes()) {
        json entry{{"name", a.name}, {"kind", to_string(a.kind)}, {"files", json::array()}};
        for (int c = 0; c < a.components; ++c, ++dim) {
            const std::string file = stem + "." + dataset.dimension_name(dim) + ".f32";
            detail::write_le_array<float>(base / file, dataset.column(dim));
            entry["files"].push_back(file);
        }
        doc["attributes"].push_back(entry);
    }
    detail::write_file_bytes(manifest, doc.dump(2) + "\n");
}

Clustering Clustering::from_labels(std::span<const std::int64_t> labels) {
    std::map<std::int64_t, std::uint32_t> dense;
    for (std::int64_t l : labels) {
        if (l < 0) throw InvalidArgument("negative cluster label");
        dense.emplace(l, 0);
    }
    std::uint32_t next = 0;
    for (auto& [orig, id] : dense) id = next++;
    Clustering c;
    c.labels_.reserve(labels.size());
    c.members_.resize(dense.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const std::uint32_t id = dense[labels[i]];
        c.labels_.push_back(id);
        c.members_[id].push_back(static_cast<std::uint32_t>(i));
    }
    return c;
}

Clustering Clustering::from_labels(std::span<const std::uint32_t> labels) {
    std::vector<std::int64_t> wide(labels.begin(), labels.end());
    return from_labels(std::span<const std::int64_t>(wide));
}

Clustering load_clustering(const std::filesystem::path& path, std::size_t expected_size) {
    const auto labels = detail::read_le_array<std::uint32_t>(path);
    if (labels.size() != expected_size)
        throw LengthMismatch(path.string() + ": expected " + std::to_string(expected_size) + " labels, found " +
                             std::to_string(labels.size()));
    return Clustering::from_labels(std::span<const std::uint32_t>(labels));
}

Clustering load_clustering(const std::filesystem::path& path, const Dataset& dataset) {
    return load_clustering(path, dataset.size());
}

void save_clustering(const Clustering& clustering, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    detail::write_le_array<std::uint32_t>(path, clustering.labels());
}

KMeansResult kmeans(const Dataset& dataset, std::size_t k, std::span<const std::size_t> feature_dims,
                    std::uint64_t seed, int max_iters) {
    const std::size_t n = dataset.size();
    if (k < 1) throw InvalidArgument("k must be at least 1");
    if (k > n) throw InvalidArgument("k exceeds the number of samples");
    if (feature_dims.empty()) throw InvalidArgument("k-means needs at least one feature dimension");
    for (std::size_t d : feature_dims)
        if (d >= dataset.dimension_count()) throw NotFound("feature dimension out of range");
    const std::size_t f = feature_dims.size();
    std::vector<double> x(n * f);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < f; ++a) x[i * f + a] = dataset.value(i, feature_dims[a]);

    auto sq = [&](std::size_t i, const double* c) {
        double s = 0.0;
        for (std::size_t a = 0; a < f; ++a) {
            const double t = x[i * f + a] - c[a];
            s += t * t;
        }
        return s;
    };

    // k-means++ seeding.
    std::mt19937_64 rng(seed);
    std::vector<double> centers;
    centers.reserve(k * f);
    std::uniform_int_distribution<std::size_t> uniform_row(0, n - 1);
    std::size_t first = uniform_row(rng);
    centers.insert(centers.end(), x.begin() + static_cast<std::ptrdiff_t>(first * f),
                   x.begin() + static_cast<std::ptrdiff_t>((first + 1) * f));
    std::vector<double> dist(n, INFINITY);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dist[i] = std::min(dist[i], sq(i, centers.data() + (c - 1) * f));
            total += dist[i];
        }
        std::size_t chosen = uniform_row(rng);
        if (total > 0.0) {
            double target = unit(rng) * total;
            for (std::size_t i = 0; i < n; ++i) {
                target -= dist[i];
                if (target <= 0.0 && dist[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        centers.insert(centers.end(), x.begin() + static_cast<std::ptrdiff_t>(chosen * f),
                       x.begin() + static_cast<std::ptrdiff_t>((chosen + 1) * f));
    }

    std::vector<std::uint32_t> label(n, 0);
    std::vector<double> d2(n, 0.0);
    KMeansResult result{Clustering{}, {}, {}, 0};
    auto assign = [&] {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = INFINITY;
            std::uint32_t arg = 0;
            for (std::size_t j = 0; j < k; ++j) {
                const double s = sq(i, centers.data() + j * f);
                if (s < best) {
                    best = s;
                    arg = static_cast<std::uint32_t>(j);
                }
            }
            changed = changed || arg != label[i];
            label[i] = arg;
            d2[i] = best;
        }
        return changed;
    };
    auto objective = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += sq(i, centers.data() + label[i] * f);
        return s;
    };

    assign();
    for (int it = 0; it < max_iters; ++it) {
        // Update step.
        std::vector<double> sum(k * f, 0.0);
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++count[label[i]];
            for (std::size_t a = 0; a < f; ++a) sum[label[i] * f + a] += x[i * f + a];
        }
        for (std::size_t j = 0; j < k; ++j)
            if (count[j] > 0)
                for (std::size_t a = 0; a < f; ++a) centers[j * f + a] = sum[j * f + a] / static_cast<double>(count[j]);
        // Empty-cluster repair: move the center onto the point farthest from
        // its own center, then give that point to the repaired cluster.
        for (std::size_t j = 0; j < k; ++j) {
            if (count[j] > 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (count[label[i]] <= 1) continue;
                const double s = sq(i, centers.data() + label[i] * f);
                if (s > far_d) {
                    far_d = s;
                    far = i;
                }
            }
            if (far_d <= 0.0) continue;
            --count[label[far]];
            label[far] = static_cast<std::uint32_t>(j);
            count[j] = 1;
            for (std::size_t a = 0; a < f; ++a) centers[j * f + a] = x[far * f + a];
        }
        result.objective_trace.push_back(objective());
        result.iterations = it + 1;
        if (!assign()) break;
    }
    if (result.objective_trace.empty()) result.objective_trace.push_back(objective());
    result.centers = std::move(centers);
    result.clustering = Clustering::from_labels(std::span<const std::uint32_t>(label));
    return result;
}

Clustering kmeans_cluster(const Dataset& dataset, std::size_t k, std::span<const std::size_t> feature_dims,
                          std::uint64_t seed) {
    return kmeans(dataset, k, feature_dims, seed).clustering;
}

SyntheticData generate_synthetic(std::uint64_t seed) {
    constexpr std::size_t per_cluster = kSyntheticPoints / kSyntheticClusters;
    constexpr std::size_t noise_per_cluster = per_cluster / 10;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    std::vector<std::vector<double>> cols(9, std::vector<double>(kSyntheticPoints));
    std::vector<std::uint32_t> labels(kSyntheticPoints);
    std::vector<std::uint8_t> noise(kSyntheticPoints, 0);

    for (std::size_t c = 0; c < kSyntheticClusters; ++c) {
        // Position: anisotropic rotated Gaussian.
        const double center[3] = {uniform(15, 85), uniform(15, 85), uniform(15, 85)};
        const double sd[3] = {uniform(1.5, 4.0), uniform(1.5, 4.0), uniform(1.5, 4.0)};
        double q[4] = {normal(rng), normal(rng), normal(rng), normal(rng)};
        const double qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        for (double& v : q) v /= qn;
        const double w = q[0], x = q[1], y = q[2], z = q[3];
        const double rot[3][3] = {{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
                                  {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
                                  {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}};
        const double noise_half = 3.0 * std::max({sd[0], sd[1], sd[2]});

        const double g_mean = uniform(-5, 5), g_sd = uniform(0.5, 1.5);
        const double u_lo = uniform(-5, 5), u_width = uniform(1, 3);
        const double e_rate = uniform(0.25, 0.5);
        const double b_mid = uniform(-5, 5), b_sep = uniform(2.5, 3.5);
        const double c_slope = uniform(0.5, 2.0), c_offset = uniform(-2, 2);
        const double k_value = uniform(0, 10);

        std::vector<std::size_t> order(per_cluster);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::uint8_t> is_noise(per_cluster, 0);
        for (std::size_t i = 0; i < noise_per_cluster; ++i) is_noise[order[i]] = 1;

        std::exponential_distribution<double> expo(e_rate);
        for (std::size_t i = 0; i < per_cluster; ++i) {
            const std::size_t row = c * per_cluster + i;
            labels[row] = static_cast<std::uint32_t>(c);
            noise[row] = is_noise[i];
            if (is_noise[i]) {
                for (int a = 0; a < 3; ++a) cols[a][row] = center[a] + uniform(-noise_half, noise_half);
            } else {
                const double s[3] = {sd[0] * normal(rng), sd[1] * normal(rng), sd[2] * normal(rng)};
                for (int a = 0; a < 3; ++a)
                    cols[a][row] = center[a] + rot[a][0] * s[0] + rot[a][1] * s[1] + rot[a][2] * s[2];
            }
            const double g = g_mean + g_sd * normal(rng);
            cols[3][row] = g;
            cols[4][row] = uniform(u_lo, u_lo + u_width);
            cols[5][row] = expo(rng);
            cols[6][row] = b_mid + (unit(rng) < 0.5 ? -0.5 : 0.5) * b_sep + 0.5 * normal(rng);
            cols[7][row] = c_slope * g + c_offset + 0.2 * normal(rng);
            cols[8][row] = k_value + 1e-3 * normal(rng);
        }
    }

    // Stored values go through float32 like any dataset file would.
    for (auto& col : cols)
        for (double& v : col) v = static_cast<double>(static_cast<float>(v));

    std::vector<AttributeSpec> attributes = {
        {"position", AttributeKind::position, 3}, {"gaussian", AttributeKind::scalar, 1},
        {"uniform", AttributeKind::scalar, 1},    {"exponential", AttributeKind::scalar, 1},
        {"bimodal", AttributeKind::scalar, 1},    {"correlated", AttributeKind::scalar, 1},
        {"constant", AttributeKind::scalar, 1},
    };
    return SyntheticData{Dataset(std::move(attributes), std::move(cols)),
                         Clustering::from_labels(std::span<const std::uint32_t>(labels)), std::move(noise)};
}

void TimeSeries::validate() const {
    if (datasets.size() != clusterings.size()) throw InvalidArgument("time series needs one clustering per frame");
    for (std::size_t t = 0; t < datasets.size(); ++t) {
        if (datasets[t].attributes() != datasets.front().attributes())
            throw FormatError("time series frames differ in their attribute list");
        if (clusterings[t].size() != datasets[t].size())
            throw LengthMismatch("clustering size does not match its frame");
    }
}

}  // namespace gmmsum
