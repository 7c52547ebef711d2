#include "gmmsum/summary.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "compress.hpp"
#include "gmmsum/error.hpp"
#include "gmmsum/metrics.hpp"
#include "gmmsum/random.hpp"
#include "parallel.hpp"

namespace gmmsum {

using nlohmann::json;

SubsetKey::SubsetKey(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > 3) throw InvalidArgument("a subset key holds one to three dimensions");
    std::sort(dims_.begin(), dims_.end());
    if (std::adjacent_find(dims_.begin(), dims_.end()) != dims_.end())
        throw InvalidArgument("subset key dimensions must be distinct");
}

std::string SubsetKey::str() const {
    std::string s;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i) s += '|';
        s += std::to_string(dims_[i]);
    }
    return s;
}

SubsetKey SubsetKey::parse(const std::string& text) {
    std::vector<std::size_t> dims;
    std::size_t start = 0;
    while (true) {
        const auto bar = text.find('|', start);
        const std::string part = text.substr(start, bar == std::string::npos ? std::string::npos : bar - start);
        if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
            throw FormatError("malformed subset key '" + text + "'");
        dims.push_back(std::stoul(part));
        if (bar == std::string::npos) break;
        start = bar + 1;
    }
    return SubsetKey(std::move(dims));
}

const Gmm& ClusterSummary::gmm(const SubsetKey& key) const {
    auto it = gmms.find(key);
    if (it == gmms.end())
        throw NotFound("cluster " + std::to_string(id) + " has no GMM for key " + key.str());
    return it->second;
}

std::vector<std::size_t> Summary::position_dims() const {
    for (std::size_t a = 0; a < attributes.size(); ++a)
        if (attributes[a].kind == AttributeKind::position) return attribute_dims(attributes, a);
    throw NotFound("summary has no position attribute");
}

std::vector<SubsetKey> full_key_set(const std::vector<AttributeSpec>& attributes) {
    const std::size_t m = linear_dimension_count(attributes);
    std::vector<SubsetKey> keys;
    for (std::size_t i = 0; i < m; ++i) keys.push_back(SubsetKey{i});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) keys.push_back(SubsetKey{i, j});
    for (std::size_t a = 0; a < attributes.size(); ++a)
        if (attributes[a].kind != AttributeKind::scalar) keys.push_back(SubsetKey(attribute_dims(attributes, a)));
    return keys;
}

namespace {

double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

// Rounds means and covariances to float32 so the stored model is exactly
// what a reload produces. Regularization inside the component may move the
// covariance again, hence the loop.
Gmm quantize(const Gmm& gmm) {
    std::vector<GaussianComponent> comps = gmm.components();
    for (int round = 0; round < 8; ++round) {
        bool stable = true;
        for (auto& g : comps) {
            std::vector<double> mean(g.mean().begin(), g.mean().end());
            std::vector<double> cov(g.packed_covariance().begin(), g.packed_covariance().end());
            for (double& v : mean) v = to_float(v);
            for (double& v : cov) v = to_float(v);
            auto q = GaussianComponent::from_packed(g.weight(), mean, cov);
            const auto stored = q.packed_covariance();
            stable = stable && std::equal(stored.begin(), stored.end(), cov.begin());
            g = std::move(q);
        }
        if (stable) break;
    }
    return Gmm(std::move(comps));
}

std::uint64_t key_stream(std::size_t cluster, const SubsetKey& key) {
    std::uint64_t h = mix64(cluster + 0x51ed27);
    for (std::size_t d : key.dims()) h = mix64(h ^ mix64(d + 1));
    return mix64(h ^ key.size());
}

// Attribute index owning a linear dimension.
std::size_t owning_attribute(const std::vector<AttributeSpec>& attributes, std::size_t dim) {
    std::size_t offset = 0;
    for (std::size_t a = 0; a < attributes.size(); ++a) {
        offset += static_cast<std::size_t>(attributes[a].components);
        if (dim < offset) return a;
    }
    throw NotFound("dimension out of range");
}

}  // namespace

Summary build_summary(const Dataset& dataset, const Clustering& clustering, const FitConfig& config,
                      const BuildOptions& options) {
    config.validate();
    if (clustering.size() != dataset.size())
        throw LengthMismatch("clustering has " + std::to_string(clustering.size()) + " labels for " +
                             std::to_string(dataset.size()) + " samples");
    const auto& attributes = dataset.attributes();
    const std::size_t m = dataset.dimension_count();
    const std::size_t cluster_count = clustering.cluster_count();
    const auto all_keys = full_key_set(attributes);
    auto wanted = [&](const SubsetKey& key) {
        return key.size() == 1 || !options.subset_filter || options.subset_filter(key);
    };

    Summary summary;
    summary.attributes = attributes;
    summary.n_total = dataset.size();
    summary.build_config = config;
    summary.provenance = dataset_fingerprint(dataset);
    summary.clusters.resize(cluster_count);

    const auto pos_dims = dataset.position_dims();
    for (std::size_t c = 0; c < cluster_count; ++c) {
        auto& cs = summary.clusters[c];
        cs.id = static_cast<std::uint32_t>(c);
        const auto rows = clustering.members(c);
        cs.sample_count = rows.size();
        for (std::size_t a = 0; a < 3; ++a) {
            double s = 0.0;
            for (std::uint32_t r : rows) s += dataset.value(r, pos_dims[a]);
            cs.centroid[a] = s / static_cast<double>(rows.size());
        }
        cs.wasserstein.assign(m, 0.0);
    }

    struct Task {
        std::size_t cluster;
        SubsetKey key;
    };
    auto run = [&](const std::vector<Task>& tasks, auto&& range_of) {
        std::vector<std::optional<Gmm>> results(tasks.size());
        detail::parallel_for(tasks.size(), options.threads, [&](std::size_t i) {
            const auto& t = tasks[i];
            const auto rows = clustering.members(t.cluster);
            const PointSet samples = dataset.gather(rows, t.key.dims());
            const auto fit = select_components(samples, range_of(t), config, key_stream(t.cluster, t.key));
            results[i] = quantize(fit.gmm);
        });
        for (std::size_t i = 0; i < tasks.size(); ++i)
            summary.clusters[tasks[i].cluster].gmms.emplace(tasks[i].key, std::move(*results[i]));
    };

    // 1D models.
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < cluster_count; ++c)
        for (std::size_t d = 0; d < m; ++d) tasks.push_back({c, SubsetKey{d}});
    run(tasks, [&](const Task&) { return std::pair{1, config.max_components}; });

    auto bounded_range = [&](const Task& t) {
        if (!options.bounded_search) return std::pair{1, config.max_components};
        std::map<std::size_t, int> counts;
        for (std::size_t d : t.key.dims())
            counts[d] = static_cast<int>(summary.clusters[t.cluster].gmm_1d(d).size());
        return component_bounds(counts, t.key.dims(), config.max_components);
    };

    // 3D models of position and vector attributes.
    tasks.clear();
    for (std::size_t c = 0; c < cluster_count; ++c)
        for (const auto& key : all_keys)
            if (key.size() == 3 && wanted(key)) tasks.push_back({c, key});
    run(tasks, bounded_range);

    // Pairs: marginals where the pair lies inside an attribute with a 3D
    // model, fitted otherwise.
    tasks.clear();
    for (std::size_t c = 0; c < cluster_count; ++c) {
        auto& cs = summary.clusters[c];
        for (const auto& key : all_keys) {
            if (key.size() != 2 || !wanted(key)) continue;
            const std::size_t a0 = owning_attribute(attributes, key[0]);
            const std::size_t a1 = owning_attribute(attributes, key[1]);
            if (a0 == a1) {
                const SubsetKey parent(attribute_dims(attributes, a0));
                if (auto it = cs.gmms.find(parent); it != cs.gmms.end()) {
                    std::vector<std::size_t> coords;
                    for (std::size_t d : key.dims())
                        coords.push_back(static_cast<std::size_t>(
                            std::find(parent.dims().begin(), parent.dims().end(), d) - parent.dims().begin()));
                    cs.gmms.emplace(key, it->second.marginal(coords));
                    continue;
                }
            }
            tasks.push_back({c, key});
        }
    }
    run(tasks, bounded_range);

    if (options.compute_wasserstein) {
        detail::parallel_for(cluster_count * m, options.threads, [&](std::size_t i) {
            const std::size_t c = i / m, d = i % m;
            const auto rows = clustering.members(c);
            const auto col = dataset.column(d);
            std::vector<double> values;
            values.reserve(rows.size());
            for (std::uint32_t r : rows) values.push_back(col[r]);
            summary.clusters[c].wasserstein[d] = wasserstein_1d(EmpiricalCdf(std::move(values)),
                                                                summary.clusters[c].gmm_1d(d));
        });
    }

    if (options.compute_outliers) {
        const SubsetKey pos_key(pos_dims);
        detail::parallel_for(cluster_count, options.threads, [&](std::size_t c) {
            auto& cs = summary.clusters[c];
            if (!cs.has(pos_key)) return;
            const auto rows = clustering.members(c);
            const auto order = rank_outliers(dataset.gather(rows, pos_dims), cs.gmm(pos_key));
            std::vector<std::uint32_t> global(order.size());
            for (std::size_t i = 0; i < order.size(); ++i) global[i] = rows[order[i]];
            cs.outlier_order.emplace(pos_key, std::move(global));
        });
    }
    return summary;
}

namespace {

const char* rule_name(WeightParamRule rule) {
    return rule == WeightParamRule::simplex ? "simplex" : "printed_dimension";
}

WeightParamRule parse_rule(const std::string& s) {
    if (s == "simplex") return WeightParamRule::simplex;
    if (s == "printed_dimension") return WeightParamRule::printed_dimension;
    throw FormatError("unknown weight rule '" + s + "'");
}

json gmm_to_json(const Gmm& gmm) {
    json weights = json::array(), means = json::array(), covs = json::array();
    for (const auto& g : gmm.components()) {
        weights.push_back(g.weight());
        json mu = json::array(), cov = json::array();
        for (double v : g.mean()) mu.push_back(static_cast<float>(v));
        for (double v : g.packed_covariance()) cov.push_back(static_cast<float>(v));
        means.push_back(std::move(mu));
        covs.push_back(std::move(cov));
    }
    return json{{"weights", weights}, {"means", means}, {"cov_lower_triangle", covs}};
}

Gmm gmm_from_json(const json& j, std::size_t d) {
    const auto& weights = j.at("weights");
    const auto& means = j.at("means");
    const auto& covs = j.at("cov_lower_triangle");
    if (weights.size() != means.size() || weights.size() != covs.size())
        throw FormatError("GMM arrays differ in length");
    std::vector<GaussianComponent> comps;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        std::vector<double> mu;
        for (const auto& v : means[k]) mu.push_back(static_cast<double>(v.get<float>()));
        std::vector<double> cov;
        for (const auto& v : covs[k]) cov.push_back(static_cast<double>(v.get<float>()));
        if (mu.size() != d || cov.size() != packed_size(d)) throw FormatError("GMM parameter has the wrong size");
        comps.push_back(GaussianComponent::from_packed(weights[k].get<double>(), std::move(mu), cov));
    }
    return Gmm(std::move(comps));
}

}  // namespace

std::string serialize_summary(const Summary& summary) {
    json doc;
    doc["format"] = "gmmsum-summary";
    doc["version"] = 1;
    doc["n"] = summary.n_total;
    doc["provenance"] = summary.provenance;
    json attrs = json::array();
    for (const auto& a : summary.attributes)
        attrs.push_back({{"name", a.name}, {"kind", to_string(a.kind)}, {"components", a.components}});
    doc["attributes"] = attrs;
    const auto& c = summary.build_config;
    doc["config"] = {{"max_components", c.max_components},
                     {"subsample_size", c.subsample_size},
                     {"em_max_iters", c.em_max_iters},
                     {"em_tol", c.em_tol},
                     {"tiny_cluster_threshold", c.tiny_cluster_threshold},
                     {"restarts", c.restarts},
                     {"seed", c.seed},
                     {"weight_rule", rule_name(c.weight_rule)}};
    json clusters = json::array();
    for (const auto& cs : summary.clusters) {
        json gmms = json::object();
        for (const auto& [key, gmm] : cs.gmms) gmms[key.str()] = gmm_to_json(gmm);
        json outliers = json::object();
        for (const auto& [key, order] : cs.outlier_order) outliers[key.str()] = order;
        clusters.push_back({{"id", cs.id},
                            {"count", cs.sample_count},
                            {"centroid", cs.centroid},
                            {"wasserstein", cs.wasserstein},
                            {"gmms", gmms},
                            {"outliers", outliers}});
    }
    doc["clusters"] = clusters;
    return detail::deflate_bytes(doc.dump(), 16 + 15, 9);
}

Summary deserialize_summary(const std::string& bytes) {
    const std::string text = detail::inflate_bytes(bytes, 16 + 15);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("summary payload is not valid JSON: ") + e.what());
    }
    try {
        if (doc.value("format", std::string()) != "gmmsum-summary") throw FormatError("not a summary file");
        const int version = doc.at("version").get<int>();
        if (version != 1) throw VersionError("unsupported summary version " + std::to_string(version));
        Summary s;
        s.n_total = doc.at("n").get<std::size_t>();
        s.provenance = doc.at("provenance").get<std::string>();
        for (const auto& a : doc.at("attributes"))
            s.attributes.push_back({a.at("name").get<std::string>(), parse_attribute_kind(a.at("kind").get<std::string>()),
                                    a.at("components").get<int>()});
        validate_attributes(s.attributes);
        const auto& c = doc.at("config");
        s.build_config.max_components = c.at("max_components").get<int>();
        s.build_config.subsample_size = c.at("subsample_size").get<std::size_t>();
        s.build_config.em_max_iters = c.at("em_max_iters").get<int>();
        s.build_config.em_tol = c.at("em_tol").get<double>();
        s.build_config.tiny_cluster_threshold = c.at("tiny_cluster_threshold").get<std::size_t>();
        s.build_config.restarts = c.at("restarts").get<int>();
        s.build_config.seed = c.at("seed").get<std::uint64_t>();
        s.build_config.weight_rule = parse_rule(c.at("weight_rule").get<std::string>());
        const std::size_t m = s.dimension_count();
        for (const auto& cj : doc.at("clusters")) {
            ClusterSummary cs;
            cs.id = cj.at("id").get<std::uint32_t>();
            cs.sample_count = cj.at("count").get<std::size_t>();
            cs.centroid = cj.at("centroid").get<std::array<double, 3>>();
            cs.wasserstein = cj.at("wasserstein").get<std::vector<double>>();
            if (cs.wasserstein.size() != m) throw FormatError("wasserstein list has the wrong length");
            for (const auto& [k, g] : cj.at("gmms").items()) {
                const auto key = SubsetKey::parse(k);
                if (key.dims().back() >= m) throw FormatError("subset key out of range");
                cs.gmms.emplace(key, gmm_from_json(g, key.size()));
            }
            if (cj.contains("outliers"))
                for (const auto& [k, order] : cj.at("outliers").items())
                    cs.outlier_order.emplace(SubsetKey::parse(k), order.get<std::vector<std::uint32_t>>());
            if (cs.id != s.clusters.size()) throw FormatError("cluster ids are not dense");
            s.clusters.push_back(std::move(cs));
        }
        return s;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed summary: ") + e.what());
    }
}

void save_summary(const Summary& summary, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    detail::write_file_bytes(path, serialize_summary(summary));
}

Summary load_summary(const std::filesystem::path& path) { return deserialize_summary(detail::read_file_bytes(path)); }

std::string dataset_fingerprint(const Dataset& dataset) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& a : dataset.attributes()) {
        feed(a.name.data(), a.name.size());
        const auto kind = to_string(a.kind);
        feed(kind.data(), kind.size());
    }
    for (std::size_t d = 0; d < dataset.dimension_count(); ++d)
        for (double v : dataset.column(d)) {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            feed(&bits, sizeof bits);
        }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SummaryStats summary_stats(const Summary& summary) {
    SummaryStats st;
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& cs : summary.clusters)
        for (const auto& [key, gmm] : cs.gmms) {
            const double k = static_cast<double>(gmm.size());
            sum += k;
            sum_sq += k * k;
            ++st.gmm_count;
        }
    if (st.gmm_count > 0) {
        st.components_mean = sum / static_cast<double>(st.gmm_count);
        st.components_std = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(st.gmm_count) -
                                                         st.components_mean * st.components_mean));
    }
    const auto per_dim = mean_wasserstein_per_dim(summary);
    if (!per_dim.empty()) {
        double w = 0.0;
        for (double v : per_dim) w += v;
        st.wasserstein_mean = w / static_cast<double>(per_dim.size());
    }
    st.byte_size = serialize_summary(summary).size();
    return st;
}

std::string format_stats(const SummaryStats& st, std::size_t cluster_count) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "GMM comp. %.2f ± %.2f, Wasserstein dist. %.4g, %.1f KiB (%zu clusters, %zu GMMs)",
                  st.components_mean, st.components_std, st.wasserstein_mean,
                  static_cast<double>(st.byte_size) / 1024.0, cluster_count, st.gmm_count);
    return buf;
}

std::vector<double> mean_wasserstein_per_dim(const Summary& summary) {
    const std::size_t m = summary.dimension_count();
    std::vector<double> out(m, 0.0);
    if (summary.clusters.empty()) return {};
    for (const auto& cs : summary.clusters)
        for (std::size_t d = 0; d < m; ++d) out[d] += cs.wasserstein[d];
    for (double& v : out) v /= static_cast<double>(summary.clusters.size());
    return out;
}

std::string error_report_json(const Summary& summary) {
    const std::size_t m = summary.dimension_count();
    json clusters = json::array();
    for (const auto& cs : summary.clusters) {
        json per_dim = json::object();
        for (std::size_t d = 0; d < m; ++d) per_dim[dimension_name(summary.attributes, d)] = cs.wasserstein[d];
        clusters.push_back({{"id", cs.id}, {"count", cs.sample_count}, {"wasserstein", per_dim}});
    }
    json means = json::object();
    const auto per_dim = mean_wasserstein_per_dim(summary);
    double total = 0.0;
    for (std::size_t d = 0; d < per_dim.size(); ++d) {
        means[dimension_name(summary.attributes, d)] = per_dim[d];
        total += per_dim[d];
    }
    return json{{"clusters", clusters},
                {"mean_per_dimension", means},
                {"mean", per_dim.empty() ? 0.0 : total / static_cast<double>(per_dim.size())}}
        .dump(2);
}

std::string error_report_csv(const Summary& summary) {
    std::ostringstream out;
    out.precision(17);
    out << "cluster,dim,name,components,count,wasserstein\n";
    for (const auto& cs : summary.clusters)
        for (std::size_t d = 0; d < summary.dimension_count(); ++d)
            out << cs.id << ',' << d << ',' << dimension_name(summary.attributes, d) << ',' << cs.gmm_1d(d).size()
                << ',' << cs.sample_count << ',' << cs.wasserstein[d] << '\n';
    return out.str();
}

std::vector<std::uint32_t> take_outliers(const ClusterSummary& cluster, const SubsetKey& key, double p) {
    auto it = cluster.outlier_order.find(key);
    if (it == cluster.outlier_order.end())
        throw NotFound("cluster " + std::to_string(cluster.id) + " has no outlier ranking for key " + key.str());
    const std::size_t k = outlier_count(p, it->second.size());
    return {it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(k)};
}

}  // namespace gmmsum
