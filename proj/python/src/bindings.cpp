#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gmmsum/dataset.hpp"
#include "gmmsum/density.hpp"
#include "gmmsum/error.hpp"
#include "gmmsum/fitting.hpp"
#include "gmmsum/interaction.hpp"
#include "gmmsum/render.hpp"
#include "gmmsum/service.hpp"
#include "gmmsum/summary.hpp"

namespace py = pybind11;
using namespace gmmsum;

namespace {

using Doubles = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <typename T>
py::array_t<T> to_numpy(const std::vector<T>& v, std::vector<py::ssize_t> shape = {}) {
    if (shape.empty()) shape = {static_cast<py::ssize_t>(v.size())};
    py::array_t<T> out(shape);
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

std::vector<double> to_vector(const std::optional<Doubles>& a) {
    if (!a) return {};
    return {a->data(), a->data() + a->size()};
}

Vec3 to_vec3(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

AttributeSpec to_attribute(const py::tuple& t) {
    AttributeSpec a;
    a.name = t[0].cast<std::string>();
    a.kind = parse_attribute_kind(t[1].cast<std::string>());
    a.components = a.kind == AttributeKind::scalar ? 1 : 3;
    return a;
}

Dataset dataset_from_array(const std::vector<py::tuple>& attributes, const Doubles& values) {
    if (values.ndim() != 2) throw InvalidArgument("values must be a 2D array of shape (n, dims)");
    std::vector<AttributeSpec> attrs;
    for (const auto& t : attributes) attrs.push_back(to_attribute(t));
    const auto n = static_cast<std::size_t>(values.shape(0)), m = static_cast<std::size_t>(values.shape(1));
    std::vector<std::vector<double>> cols(m, std::vector<double>(n));
    const double* p = values.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < m; ++d) cols[d][i] = p[i * m + d];
    return Dataset(std::move(attrs), std::move(cols));
}

Clustering clustering_from(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& labels) {
    return Clustering::from_labels(std::span<const std::int64_t>(labels.data(), static_cast<std::size_t>(labels.size())));
}

py::dict gmm_to_dict(const Gmm& g) {
    const auto k = static_cast<py::ssize_t>(g.size()), d = static_cast<py::ssize_t>(g.dim());
    std::vector<double> w, mu, cov;
    for (const auto& c : g.components()) {
        w.push_back(c.weight());
        mu.insert(mu.end(), c.mean().begin(), c.mean().end());
        for (py::ssize_t i = 0; i < d; ++i)
            for (py::ssize_t j = 0; j < d; ++j) cov.push_back(c.covariance(i, j));
    }
    py::dict out;
    out["weights"] = to_numpy(w);
    out["means"] = to_numpy(mu, {k, d});
    out["covariances"] = to_numpy(cov, {k, d, d});
    return out;
}

GaussianComponent component_from(const Doubles& mean, const Doubles& cov) {
    if (mean.size() != 3 || cov.size() != 9) throw DimensionMismatch("expected a 3D mean and a 3x3 covariance");
    return GaussianComponent(1.0, {mean.data(), mean.data() + 3}, Matrix(3, 3, {cov.data(), cov.data() + 9}));
}

py::array_t<double> grid_to_numpy(const DensityGrid& g) {
    if (g.resolution.size() == 1) return to_numpy(g.values);
    return to_numpy(g.values, {static_cast<py::ssize_t>(g.resolution[1]), static_cast<py::ssize_t>(g.resolution[0])});
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Gaussian mixture summaries of scattered multivariate data";

    static py::exception<Error> base_error(m, "GmmsumError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const NotFound& e) {
            PyErr_SetString(PyExc_KeyError, e.what());
        } catch (const InvalidArgument& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const IoError& e) {
            PyErr_SetString(PyExc_OSError, e.what());
        } catch (const Error& e) {
            py::set_error(base_error, e.what());
        }
    });

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&dataset_from_array), py::arg("attributes"), py::arg("values"),
             "attributes: list of (name, kind) with kind position|vector|scalar; values: (n, dims) array")
        .def_property_readonly("size", &Dataset::size)
        .def_property_readonly("dimension_count", &Dataset::dimension_count)
        .def_property_readonly("attribute_names",
                               [](const Dataset& d) {
                                   std::vector<std::string> out;
                                   for (const auto& a : d.attributes()) out.push_back(a.name);
                                   return out;
                               })
        .def("dimension_name", &Dataset::dimension_name)
        .def("column", [](const Dataset& d, std::size_t dim) {
            const auto c = d.column(dim);
            return to_numpy(std::vector<double>(c.begin(), c.end()));
        })
        .def("to_array", [](const Dataset& d) {
            const std::size_t n = d.size(), k = d.dimension_count();
            std::vector<double> v(n * k);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < k; ++j) v[i * k + j] = d.value(i, j);
            return to_numpy(v, {static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(k)});
        })
        .def("__eq__", [](const Dataset& a, const Dataset& b) { return a == b; });

    m.def("load_dataset", &load_dataset, py::arg("manifest"));
    m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("manifest"));
    m.def("load_labels", [](const std::filesystem::path& p, const Dataset& d) {
        const auto c = load_clustering(p, d);
        return to_numpy(std::vector<std::uint32_t>(c.labels().begin(), c.labels().end()));
    });
    m.def("save_labels", [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& labels,
                            const std::filesystem::path& p) { save_clustering(clustering_from(labels), p); });
    m.def(
        "generate_synthetic",
        [](std::uint64_t seed) {
            auto s = generate_synthetic(seed);
            const auto lab = s.clustering.labels();
            return py::make_tuple(std::move(s.dataset), to_numpy(std::vector<std::uint32_t>(lab.begin(), lab.end())),
                                  to_numpy(s.noise_mask));
        },
        py::arg("seed") = 1, "Returns (dataset, labels, noise_mask).");
    m.def(
        "kmeans_labels",
        [](const Dataset& d, std::size_t k, std::uint64_t seed) {
            const auto pos = d.position_dims();
            const auto c = kmeans_cluster(d, k, pos, seed);
            return to_numpy(std::vector<std::uint32_t>(c.labels().begin(), c.labels().end()));
        },
        py::arg("dataset"), py::arg("k"), py::arg("seed") = 0);

    py::class_<FitConfig>(m, "FitConfig")
        .def(py::init<>())
        .def_readwrite("max_components", &FitConfig::max_components)
        .def_readwrite("subsample_size", &FitConfig::subsample_size)
        .def_readwrite("em_max_iters", &FitConfig::em_max_iters)
        .def_readwrite("em_tol", &FitConfig::em_tol)
        .def_readwrite("tiny_cluster_threshold", &FitConfig::tiny_cluster_threshold)
        .def_readwrite("restarts", &FitConfig::restarts)
        .def_readwrite("seed", &FitConfig::seed);

    m.def(
        "fit_em",
        [](const Doubles& points, int k, std::uint64_t seed, const FitConfig& cfg) {
            if (points.ndim() != 2) throw InvalidArgument("points must be (n, d)");
            const PointSet p(static_cast<std::size_t>(points.shape(1)),
                             std::vector<double>(points.data(), points.data() + points.size()));
            const auto r = fit_em(p, k, seed, cfg);
            py::dict out = gmm_to_dict(r.gmm);
            out["log_likelihood"] = r.log_likelihood;
            out["bic"] = r.bic;
            out["log_likelihood_trace"] = r.log_likelihood_trace;
            out["iterations"] = r.iterations;
            return out;
        },
        py::arg("points"), py::arg("k"), py::arg("seed") = 0, py::arg("config") = FitConfig{});

    py::class_<Summary>(m, "Summary")
        .def_property_readonly("cluster_count", &Summary::cluster_count)
        .def_property_readonly("dimension_count", &Summary::dimension_count)
        .def_readonly("n_total", &Summary::n_total)
        .def_property_readonly("cluster_sizes",
                               [](const Summary& s) {
                                   std::vector<std::size_t> out;
                                   for (const auto& c : s.clusters) out.push_back(c.sample_count);
                                   return out;
                               })
        .def("keys",
             [](const Summary& s, std::size_t cluster) {
                 std::vector<std::string> out;
                 for (const auto& [k, g] : s.clusters.at(cluster).gmms) out.push_back(k.str());
                 return out;
             })
        .def("gmm",
             [](const Summary& s, std::size_t cluster, const std::string& key) {
                 return gmm_to_dict(s.clusters.at(cluster).gmm(SubsetKey::parse(key)));
             })
        .def("wasserstein",
             [](const Summary& s) {
                 std::vector<double> v;
                 for (const auto& c : s.clusters) v.insert(v.end(), c.wasserstein.begin(), c.wasserstein.end());
                 return to_numpy(v, {static_cast<py::ssize_t>(s.cluster_count()),
                                     static_cast<py::ssize_t>(s.dimension_count())});
             })
        .def("mean_wasserstein_per_dim", [](const Summary& s) { return to_numpy(mean_wasserstein_per_dim(s)); })
        .def("stats",
             [](const Summary& s) {
                 const auto st = summary_stats(s);
                 py::dict d;
                 d["gmm_count"] = st.gmm_count;
                 d["components_mean"] = st.components_mean;
                 d["components_std"] = st.components_std;
                 d["wasserstein_mean"] = st.wasserstein_mean;
                 d["byte_size"] = st.byte_size;
                 d["text"] = format_stats(st, s.cluster_count());
                 return d;
             })
        .def("error_report_json", [](const Summary& s) { return error_report_json(s); })
        .def("serialize", [](const Summary& s) { return py::bytes(serialize_summary(s)); })
        .def_static("deserialize", [](const py::bytes& b) { return deserialize_summary(std::string(b)); })
        .def("save", [](const Summary& s, const std::filesystem::path& p) { save_summary(s, p); })
        .def("__eq__", [](const Summary& a, const Summary& b) { return a == b; });

    m.def(
        "build_summary",
        [](const Dataset& d, const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& labels,
           const FitConfig& cfg, bool skip_pairs, bool bounded_search, bool outliers, unsigned threads) {
            const auto c = clustering_from(labels);
            BuildOptions o;
            if (skip_pairs) o.subset_filter = [](const SubsetKey& k) { return k.size() != 2; };
            o.bounded_search = bounded_search;
            o.compute_outliers = outliers;
            o.threads = threads;
            py::gil_scoped_release release;
            return build_summary(d, c, cfg, o);
        },
        py::arg("dataset"), py::arg("labels"), py::arg("config") = FitConfig{}, py::arg("skip_pairs") = false,
        py::arg("bounded_search") = true, py::arg("outliers") = false, py::arg("threads") = 0u);
    m.def("load_summary", &load_summary, py::arg("path"));

    m.def(
        "default_extent",
        [](const Summary& s, std::size_t dim) {
            const auto e = default_extent(s, dim);
            return py::make_tuple(e.lo, e.hi);
        },
        py::arg("summary"), py::arg("dim"));
    m.def(
        "density_1d",
        [](const Summary& s, std::size_t dim, std::size_t bins, std::optional<std::pair<double, double>> extent,
           std::optional<Doubles> doi) {
            const Extent e = extent ? Extent{extent->first, extent->second} : default_extent(s, dim);
            return grid_to_numpy(density_1d(s, dim, e, bins, to_vector(doi)));
        },
        py::arg("summary"), py::arg("dim"), py::arg("bins") = 200, py::arg("extent") = py::none(),
        py::arg("doi") = py::none());
    m.def(
        "density_2d",
        [](const Summary& s, std::size_t dx, std::size_t dy, std::size_t w, std::size_t h, std::optional<Doubles> doi) {
            return grid_to_numpy(density_2d(s, dx, dy, default_extent(s, dx), default_extent(s, dy), w, h, to_vector(doi)));
        },
        py::arg("summary"), py::arg("dim_x"), py::arg("dim_y"), py::arg("width") = 200, py::arg("height") = 200,
        py::arg("doi") = py::none(), "Array of shape (height, width); row i is the i-th cell along dim_y.");
    m.def(
        "pcp",
        [](const Summary& s, const std::vector<std::size_t>& axes, std::size_t w, std::size_t h,
           std::optional<Doubles> doi) {
            const auto img = pcp_image(s, axes, w, h, to_vector(doi));
            return to_numpy(img.assemble(), {static_cast<py::ssize_t>(h), static_cast<py::ssize_t>(w * (axes.size() - 1))});
        },
        py::arg("summary"), py::arg("axes"), py::arg("width") = 100, py::arg("height") = 200,
        py::arg("doi") = py::none());
    m.def(
        "time_histogram",
        [](const std::vector<Summary>& ts, std::size_t dim, std::size_t bins, std::pair<double, double> extent) {
            const auto rows = time_histogram(ts, dim, bins, Extent{extent.first, extent.second});
            std::vector<double> flat;
            for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
            return to_numpy(flat, {static_cast<py::ssize_t>(rows.size()), static_cast<py::ssize_t>(bins)});
        },
        py::arg("summaries"), py::arg("dim"), py::arg("bins"), py::arg("extent"));
    m.def("tone_map", [](double rho, double gamma) { return tone_map(rho, ToneMapParams{gamma}); }, py::arg("density"),
          py::arg("gamma") = 1.0);

    m.def(
        "brush_doi", [](const Summary& s, std::size_t dim, double a, double b) { return to_numpy(brush_doi(s, Brush{dim, a, b})); },
        py::arg("summary"), py::arg("dim"), py::arg("a"), py::arg("b"));
    m.def(
        "combine_doi",
        [](const std::vector<std::vector<double>>& parts, const std::string& mode) {
            return to_numpy(combine_doi(parts, parse_combine_mode(mode)));
        },
        py::arg("dois"), py::arg("mode") = "and");

    py::class_<TransferMatrix>(m, "TransferMatrix")
        .def_property_readonly("shape", [](const TransferMatrix& t) { return py::make_tuple(t.rows(), t.cols()); })
        .def_property_readonly("nonzeros", &TransferMatrix::nonzeros)
        .def("row_sums", [](const TransferMatrix& t) { return to_numpy(t.row_sums()); })
        .def("then", &TransferMatrix::then)
        .def("advance", [](const TransferMatrix& t, const Doubles& doi) {
            return to_numpy(advance_doi(t, std::vector<double>(doi.data(), doi.data() + doi.size())));
        });
    m.def(
        "transfer_matrix",
        [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& current,
           const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& next) {
            return build_transfer_matrix(clustering_from(current), clustering_from(next));
        },
        py::arg("labels_t"), py::arg("labels_next"));

    m.def(
        "ray_integral",
        [](const Doubles& mean, const Doubles& cov, std::array<double, 3> o, std::array<double, 3> n, double t0,
           double t1) { return ray_integral_interval(component_from(mean, cov), to_vec3(o), to_vec3(n), t0, t1); },
        py::arg("mean"), py::arg("cov"), py::arg("origin"), py::arg("direction"),
        py::arg("t0") = -std::numeric_limits<double>::infinity(), py::arg("t1") = std::numeric_limits<double>::infinity());

    m.def(
        "render",
        [](const Summary& s, std::size_t width, std::size_t height, std::optional<std::string> camera_json,
           double gamma, std::optional<std::size_t> color_dim, std::optional<Doubles> doi, std::optional<std::string> tf_json) {
            Camera cam = default_camera(s, width, height);
            if (camera_json) cam = camera_from_json(*camera_json, cam);
            RenderOptions opt;
            opt.tone.gamma = gamma;
            opt.color_dim = color_dim ? *color_dim : default_color_dim(s);
            const TransferFunction tf =
                tf_json ? transfer_function_from_json(*tf_json) : default_transfer_function(default_extent(s, opt.color_dim));
            const auto lut = lut_for_summary(s, tf, opt.color_dim);
            const auto d = to_vector(doi);
            RenderFrame f;
            {
                py::gil_scoped_release release;
                f = splat_frame(s, cam, lut, d, opt);
            }
            return to_numpy(f.rgba8, {static_cast<py::ssize_t>(f.height), static_cast<py::ssize_t>(f.width), 4});
        },
        py::arg("summary"), py::arg("width") = 640, py::arg("height") = 480, py::arg("camera") = py::none(),
        py::arg("gamma") = 1.0, py::arg("color_dim") = py::none(), py::arg("doi") = py::none(),
        py::arg("transfer_function") = py::none(), "RGBA uint8 array of shape (height, width, 4).");

    py::class_<Service>(m, "Service")
        .def(py::init<Summary>(), py::arg("summary"))
        .def(py::init<std::vector<Summary>, std::vector<TransferMatrix>>(), py::arg("timesteps"), py::arg("transfers"))
        .def(
            "handle",
            [](Service& svc, const std::string& method, const std::string& path,
               std::map<std::string, std::string> query, const std::string& body) {
                Response r;
                {
                    py::gil_scoped_release release;
                    r = svc.handle(Request{method, path, std::move(query), body});
                }
                return py::make_tuple(r.status, r.content_type, py::bytes(r.body));
            },
            py::arg("method"), py::arg("path"), py::arg("query") = std::map<std::string, std::string>{},
            py::arg("body") = "", "Returns (status, content_type, body bytes).")
        .def(
            "serve",
            [](Service& svc, const std::string& host, int port) {
                py::gil_scoped_release release;
                svc.serve(host, port);
            },
            py::arg("host") = "127.0.0.1", py::arg("port") = 8080);
}
