#include "gmmsum/service.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iostream>

#include <httplib.h>
#include <json.hpp>

#include "gmmsum/error.hpp"

namespace gmmsum {

using nlohmann::json;

namespace {

struct HttpError : std::runtime_error {
    int status;
    HttpError(int s, const std::string& msg) : std::runtime_error(msg), status(s) {}
};

Response json_response(const json& j, int status = 200) { return {status, "application/json", j.dump()}; }

Response error_response(int status, const std::string& message) {
    return json_response(json{{"error", message}, {"status", status}}, status);
}

const std::string* find_param(const Request& r, const std::string& name) {
    auto it = r.query.find(name);
    return it == r.query.end() ? nullptr : &it->second;
}

std::size_t parse_size(const std::string& name, const std::string& text) {
    std::size_t v = 0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (text.empty() || res.ec != std::errc() || res.ptr != end)
        throw HttpError(400, "parameter '" + name + "' must be a non-negative integer");
    return v;
}

double parse_double(const std::string& name, const std::string& text) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::logic_error&) {
        throw HttpError(400, "parameter '" + name + "' must be a finite number");
    }
}

std::size_t size_param(const Request& r, const std::string& name, std::optional<std::size_t> fallback,
                       std::size_t max_value = 1u << 14) {
    const auto* p = find_param(r, name);
    if (!p) {
        if (!fallback) throw HttpError(400, "missing parameter '" + name + "'");
        return *fallback;
    }
    const auto v = parse_size(name, *p);
    if (v == 0 || v > max_value) throw HttpError(400, "parameter '" + name + "' out of range");
    return v;
}

std::vector<std::size_t> list_param(const Request& r, const std::string& name) {
    const auto* p = find_param(r, name);
    if (!p) throw HttpError(400, "missing parameter '" + name + "'");
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = p->find(',', start);
        out.push_back(parse_size(name, p->substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

json parse_body(const Request& r) {
    try {
        return r.body.empty() ? json::object() : json::parse(r.body);
    } catch (const json::exception&) {
        throw HttpError(400, "request body is not valid JSON");
    }
}

Extent extent_param(const Request& r, const Summary& s, std::size_t dim, const std::string& lo_name,
                    const std::string& hi_name) {
    Extent e = default_extent(s, dim);
    if (const auto* p = find_param(r, lo_name)) e.lo = parse_double(lo_name, *p);
    if (const auto* p = find_param(r, hi_name)) e.hi = parse_double(hi_name, *p);
    if (!(e.hi > e.lo)) throw HttpError(400, "extent must satisfy lo < hi");
    return e;
}

void check_dim(const Summary& s, std::size_t dim) {
    if (dim >= s.dimension_count()) throw NotFound("unknown dimension " + std::to_string(dim));
}

double mean_of(const DoiVector& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

Vec3 vec_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw InvalidArgument("expected a 3-element array");
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

Camera camera_from_json(const std::string& text, const Camera& base) {
    Camera c = base;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw InvalidArgument("camera must be a JSON object");
        if (j.contains("eye")) c.eye = vec_from_json(j["eye"]);
        if (j.contains("look_at")) c.look_at = vec_from_json(j["look_at"]);
        if (j.contains("up")) c.up = vec_from_json(j["up"]);
        if (j.contains("fov_deg")) c.vertical_fov = j["fov_deg"].get<double>() * kPi / 180.0;
        if (j.contains("fov")) c.vertical_fov = j["fov"].get<double>();
        if (j.contains("width")) c.width = j["width"].get<std::size_t>();
        if (j.contains("height")) c.height = j["height"].get<std::size_t>();
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed camera: ") + e.what());
    }
    c.validate();
    return c;
}

TransferFunction transfer_function_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        std::vector<TransferFunction::ControlPoint> pts;
        for (const auto& p : j.at("points")) {
            const auto& c = p.at("rgba");
            if (c.size() != 4) throw InvalidArgument("rgba needs four entries");
            pts.push_back({p.at("value").get<double>(),
                           {c[0].get<double>(), c[1].get<double>(), c[2].get<double>(), c[3].get<double>()}});
        }
        return TransferFunction(std::move(pts));
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed transfer function: ") + e.what());
    }
}

DoiVector retreat_doi(const TransferMatrix& m, std::span<const double> doi_next, const Summary& at_t,
                      const Summary& at_next) {
    if (m.rows() != at_next.cluster_count() || m.cols() != at_t.cluster_count())
        throw DimensionMismatch("transfer matrix does not match the summaries");
    if (doi_next.size() != m.rows()) throw DimensionMismatch("DOI length differs from the matrix row count");
    DoiVector out(m.cols(), 0.0);
    for (const auto& [r, c, v] : m.triples()) {
        const double overlap = v * static_cast<double>(at_next.clusters[r].sample_count);
        out[c] += overlap / static_cast<double>(at_t.clusters[c].sample_count) * doi_next[r];
    }
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
    return out;
}

Service::Service(Summary summary, ServiceConfig config) : config_(config) {
    timesteps_.push_back(std::move(summary));
    state_.doi.assign(timesteps_.front().cluster_count(), 1.0);
}

Service::Service(std::vector<Summary> timesteps, std::vector<TransferMatrix> transfers, ServiceConfig config)
    : timesteps_(std::move(timesteps)), transfers_(std::move(transfers)), config_(config) {
    if (timesteps_.empty()) throw InvalidArgument("service needs at least one summary");
    if (timesteps_.size() > 1 && transfers_.size() != timesteps_.size() - 1)
        throw InvalidArgument("a time series of T summaries needs T - 1 transfer matrices");
    for (std::size_t t = 0; t + 1 < timesteps_.size(); ++t) {
        if (timesteps_[t].attributes != timesteps_[t + 1].attributes)
            throw FormatError("timesteps differ in their attribute schema");
        if (transfers_[t].cols() != timesteps_[t].cluster_count() ||
            transfers_[t].rows() != timesteps_[t + 1].cluster_count())
            throw DimensionMismatch("transfer matrix " + std::to_string(t) + " does not match the cluster counts");
    }
    state_.doi.assign(timesteps_.front().cluster_count(), 1.0);
}

void Service::attach_raw_data(Dataset dataset, Clustering clustering) {
    std::lock_guard lock(mutex_);
    const auto& s = timesteps_.front();
    if (dataset.size() != s.n_total || clustering.cluster_count() != s.cluster_count())
        throw DimensionMismatch("raw data does not match the first summary");
    dataset_ = std::make_unique<Dataset>(std::move(dataset));
    clustering_ = std::make_unique<Clustering>(std::move(clustering));
}

SessionState Service::session() const {
    std::lock_guard lock(mutex_);
    return state_;
}

Response Service::handle(const Request& request) {
    std::lock_guard lock(mutex_);
    try {
        return dispatch(request);
    } catch (const HttpError& e) {
        return error_response(e.status, e.what());
    } catch (const NotFound& e) {
        return error_response(404, e.what());
    } catch (const InvalidArgument& e) {
        return error_response(400, e.what());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

Response Service::dispatch(const Request& r) {
    const auto& p = r.path;
    if (r.method == "GET") {
        if (p == "/api/summary") return get_summary();
        if (p == "/api/density1d") return get_density1d(r);
        if (p == "/api/density2d") return get_density2d(r);
        if (p == "/api/pcp") return get_pcp(r);
        if (p == "/api/timehist") return get_timehist(r);
        if (p == "/api/frame") return get_frame(r);
        if (p == "/api/errors") return get_errors();
    } else if (r.method == "POST") {
        if (p == "/api/brush") return post_brush(r);
        if (p == "/api/timestep") return post_timestep(r);
        if (p == "/api/lod") return post_lod(r);
    } else if (r.method == "DELETE") {
        if (p == "/api/brush") return delete_brush();
    }
    return error_response(404, "no route for " + r.method + " " + p);
}

std::unique_ptr<LodSubstitution> Service::lod() const {
    if (!state_.lod_threshold || state_.timestep != 0 || !dataset_) return nullptr;
    return std::make_unique<LodSubstitution>(
        lod_substitute(current(), state_.doi, *state_.lod_threshold, *dataset_, *clustering_));
}

Response Service::get_summary() const {
    const auto& s = current();
    json attrs = json::array();
    for (const auto& a : s.attributes)
        attrs.push_back({{"name", a.name}, {"kind", to_string(a.kind)}, {"components", a.components}});
    json dims = json::array(), extents = json::array();
    for (std::size_t d = 0; d < s.dimension_count(); ++d) {
        dims.push_back(dimension_name(s.attributes, d));
        if (s.cluster_count() > 0) {
            const auto e = default_extent(s, d);
            extents.push_back({e.lo, e.hi});
        }
    }
    const auto st = summary_stats(s);
    json sizes = json::array();
    for (const auto& cs : s.clusters) sizes.push_back(cs.sample_count);
    return json_response({{"attributes", attrs},
                          {"dimensions", dims},
                          {"cluster_count", s.cluster_count()},
                          {"cluster_sizes", sizes},
                          {"n", s.n_total},
                          {"extents", extents},
                          {"mean_wasserstein", st.wasserstein_mean},
                          {"components_mean", st.components_mean},
                          {"components_std", st.components_std},
                          {"byte_size", st.byte_size},
                          {"timesteps", timesteps_.size()},
                          {"timestep", state_.timestep},
                          {"mean_doi", mean_of(state_.doi)},
                          {"lod_threshold", state_.lod_threshold ? json(*state_.lod_threshold) : json(nullptr)}});
}

Response Service::get_density1d(const Request& r) const {
    const auto& s = current();
    const auto dim = size_param(r, "dim", std::nullopt, 1u << 20);
    check_dim(s, dim);
    const auto bins = size_param(r, "bins", config_.density_bins);
    const auto e = extent_param(r, s, dim, "lo", "hi");
    const auto sub = lod();
    const auto values = density_1d(s, dim, e, bins, state_.doi, sub.get());
    const auto context = density_1d(s, dim, e, bins, {}, sub.get());
    return json_response({{"dim", dim},
                          {"name", dimension_name(s.attributes, dim)},
                          {"extent", {e.lo, e.hi}},
                          {"bins", bins},
                          {"values", values.values},
                          {"context", context.values}});
}

Response Service::get_density2d(const Request& r) const {
    const auto& s = current();
    const auto dims = list_param(r, "dims");
    if (dims.size() != 2) throw HttpError(400, "dims must list two dimensions");
    check_dim(s, dims[0]);
    check_dim(s, dims[1]);
    if (dims[0] == dims[1]) throw HttpError(400, "dims must differ");
    const auto w = size_param(r, "w", config_.grid_width);
    const auto h = size_param(r, "h", config_.grid_height);
    const auto ex = extent_param(r, s, dims[0], "xlo", "xhi");
    const auto ey = extent_param(r, s, dims[1], "ylo", "yhi");
    const auto sub = lod();
    const auto values = density_2d(s, dims[0], dims[1], ex, ey, w, h, state_.doi, sub.get());
    const auto context = density_2d(s, dims[0], dims[1], ex, ey, w, h, {}, sub.get());
    return json_response({{"dims", dims},
                          {"extent", {{ex.lo, ex.hi}, {ey.lo, ey.hi}}},
                          {"width", w},
                          {"height", h},
                          {"values", values.values},
                          {"context", context.values}});
}

Response Service::get_pcp(const Request& r) const {
    const auto& s = current();
    const auto axes = list_param(r, "axes");
    if (axes.size() < 2) throw HttpError(400, "axes must list at least two dimensions");
    for (std::size_t a : axes) check_dim(s, a);
    const auto w = size_param(r, "w", config_.pcp_width);
    const auto h = size_param(r, "h", config_.pcp_height);
    if (w < 2) throw HttpError(400, "w must be at least 2");
    const auto values = pcp_image(s, axes, w, h, state_.doi);
    const auto context = pcp_image(s, axes, w, h, {}, values.extents);
    json panels = json::array();
    for (std::size_t p = 0; p < values.panels.size(); ++p)
        panels.push_back({{"pair", {axes[p], axes[p + 1]}},
                          {"values", values.panels[p].values},
                          {"context", context.panels[p].values}});
    json extents = json::array();
    for (const auto& e : values.extents) extents.push_back({e.lo, e.hi});
    return json_response({{"axes", axes}, {"extents", extents}, {"width", w}, {"height", h}, {"panels", panels}});
}

std::vector<DoiVector> Service::doi_per_timestep() const {
    std::vector<DoiVector> out(timesteps_.size());
    out[state_.timestep] = state_.doi;
    for (std::size_t t = state_.timestep; t + 1 < timesteps_.size(); ++t) out[t + 1] = advance_doi(transfers_[t], out[t]);
    for (std::size_t t = state_.timestep; t > 0; --t)
        out[t - 1] = retreat_doi(transfers_[t - 1], out[t], timesteps_[t - 1], timesteps_[t]);
    return out;
}

Response Service::get_timehist(const Request& r) const {
    const auto& s = current();
    const auto dim = size_param(r, "dim", std::nullopt, 1u << 20);
    check_dim(s, dim);
    const auto bins = size_param(r, "bins", config_.density_bins);
    Extent e{INFINITY, -INFINITY};
    for (const auto& ts : timesteps_) {
        const auto x = default_extent(ts, dim);
        e.lo = std::min(e.lo, x.lo);
        e.hi = std::max(e.hi, x.hi);
    }
    if (const auto* p = find_param(r, "lo")) e.lo = parse_double("lo", *p);
    if (const auto* p = find_param(r, "hi")) e.hi = parse_double("hi", *p);
    if (!(e.hi > e.lo)) throw HttpError(400, "extent must satisfy lo < hi");
    const auto dois = doi_per_timestep();
    const auto rows = time_histogram(timesteps_, dim, bins, e, dois);
    const auto context = time_histogram(timesteps_, dim, bins, e);
    return json_response({{"dim", dim}, {"extent", {e.lo, e.hi}}, {"bins", bins}, {"rows", rows}, {"context", context}});
}

Response Service::get_frame(const Request& r) const {
    const auto& s = current();
    Camera cam = default_camera(s, size_param(r, "w", config_.frame_width), size_param(r, "h", config_.frame_height));
    if (const auto* p = find_param(r, "camera")) cam = camera_from_json(*p, cam);
    RenderOptions opts;
    if (const auto* p = find_param(r, "gamma")) opts.tone.gamma = parse_double("gamma", *p);
    else opts.tone.gamma = state_.gamma;
    if (!(opts.tone.gamma > 0.0)) throw HttpError(400, "gamma must be positive");
    if (const auto* p = find_param(r, "color_dim")) opts.color_dim = parse_size("color_dim", *p);
    else opts.color_dim = default_color_dim(s);
    check_dim(s, opts.color_dim);
    const auto tf = find_param(r, "tf") ? transfer_function_from_json(*find_param(r, "tf"))
                                        : default_transfer_function(s.cluster_count() > 0 ? default_extent(s, opts.color_dim)
                                                                                          : Extent{0.0, 1.0});
    const TfLut lut = lut_for_summary(s, tf, opts.color_dim);
    const auto frame = splat_frame(s, cam, lut, state_.doi, opts);
    const std::string format = find_param(r, "format") ? *find_param(r, "format") : "png";
    if (format == "png") return {200, "image/png", encode_png(frame)};
    if (format == "ppm") return {200, "image/x-portable-pixmap", encode_ppm(frame)};
    throw HttpError(400, "format must be png or ppm");
}

Response Service::get_errors() const { return {200, "application/json", error_report_json(current())}; }

Response Service::post_brush(const Request& r) {
    const json body = parse_body(r);
    Brush b;
    std::string mode = "replace";
    try {
        b.dim = body.at("dim").get<std::size_t>();
        b.a = body.at("a").get<double>();
        b.b = body.at("b").get<double>();
        if (body.contains("mode")) mode = body.at("mode").get<std::string>();
    } catch (const json::exception& e) {
        throw HttpError(400, std::string("brush needs dim, a and b: ") + e.what());
    }
    if (!std::isfinite(b.a) || !std::isfinite(b.b) || b.a > b.b) throw HttpError(400, "brush range must satisfy a <= b");
    const auto& s = current();
    check_dim(s, b.dim);
    const DoiVector brushed = brush_doi(s, b);
    if (mode == "replace" || state_.brushes.empty()) {
        if (mode != "replace" && mode != "and" && mode != "or") throw HttpError(400, "mode must be replace, and or or");
        state_.doi = brushed;
        state_.brushes = {b};
    } else {
        const std::vector<DoiVector> both = {state_.doi, brushed};
        state_.doi = combine_doi(both, parse_combine_mode(mode));
        state_.brushes.push_back(b);
    }
    return json_response({{"doi", state_.doi},
                          {"mean_doi", mean_of(state_.doi)},
                          {"min_doi", *std::min_element(state_.doi.begin(), state_.doi.end())},
                          {"max_doi", *std::max_element(state_.doi.begin(), state_.doi.end())},
                          {"brushes", state_.brushes.size()}});
}

Response Service::delete_brush() {
    state_.brushes.clear();
    state_.doi.assign(current().cluster_count(), 1.0);
    return json_response({{"doi", state_.doi}, {"mean_doi", mean_of(state_.doi)}, {"brushes", 0}});
}

Response Service::post_timestep(const Request& r) {
    if (timesteps_.size() < 2) throw HttpError(409, "no time series loaded");
    const json body = parse_body(r);
    std::size_t t = 0;
    try {
        t = body.at("t").get<std::size_t>();
    } catch (const json::exception&) {
        throw HttpError(400, "timestep body needs a non-negative integer t");
    }
    if (t >= timesteps_.size()) throw HttpError(400, "timestep out of range");
    const auto dois = doi_per_timestep();
    state_.timestep = t;
    state_.doi = dois[t];
    state_.brushes.clear();
    return json_response({{"t", t}, {"doi", state_.doi}, {"mean_doi", mean_of(state_.doi)}});
}

Response Service::post_lod(const Request& r) {
    if (!dataset_) throw HttpError(409, "no raw data attached for level-of-detail substitution");
    const json body = parse_body(r);
    if (body.contains("threshold") && body["threshold"].is_null()) {
        state_.lod_threshold.reset();
        return json_response({{"threshold", nullptr}, {"substituted", 0}});
    }
    double threshold = 0.0;
    try {
        threshold = body.at("threshold").get<double>();
    } catch (const json::exception&) {
        throw HttpError(400, "lod body needs a numeric threshold");
    }
    if (!(threshold >= 0.0)) throw HttpError(400, "threshold must be non-negative");
    state_.lod_threshold = threshold;
    const auto sub = lod();
    return json_response({{"threshold", threshold}, {"substituted", sub ? sub->substituted_count() : 0}});
}

void Service::serve(const std::string& host, int port) {
    httplib::Server server;
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    auto bridge = [this](const std::string& method) {
        return [this, method](const httplib::Request& req, httplib::Response& res) {
            Request r{method, req.path, {}, req.body};
            for (const auto& [k, v] : req.params) r.query[k] = v;
            const Response out = handle(r);
            res.status = out.status;
            res.set_content(out.body, out.content_type);
        };
    };
    server.Get(R"(/api/.*)", bridge("GET"));
    server.Post(R"(/api/.*)", bridge("POST"));
    server.Delete(R"(/api/.*)", bridge("DELETE"));
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    std::cerr << "serving on http://" << host << ":" << port << "/api/summary\n";
    if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace gmmsum
