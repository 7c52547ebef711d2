#include "gmmsum/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "binary_io.hpp"
#include "gmmsum/error.hpp"
#include "gmmsum/service.hpp"

namespace gmmsum {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Brush parse_brush(const std::string& text) {
    // dim:a:b
    const auto c1 = text.find(':');
    const auto c2 = c1 == std::string::npos ? c1 : text.find(':', c1 + 1);
    if (c2 == std::string::npos) throw InvalidArgument("brush must look like dim:a:b, got '" + text + "'");
    try {
        return {static_cast<std::size_t>(std::stoul(text.substr(0, c1))), std::stod(text.substr(c1 + 1, c2 - c1 - 1)),
                std::stod(text.substr(c2 + 1))};
    } catch (const std::logic_error&) {
        throw InvalidArgument("brush must look like dim:a:b, got '" + text + "'");
    }
}

DoiVector brushes_to_doi(const Summary& s, const std::vector<std::string>& brushes, const std::string& mode) {
    if (brushes.empty()) return DoiVector(s.cluster_count(), 1.0);
    std::vector<DoiVector> parts;
    for (const auto& b : brushes) parts.push_back(brush_doi(s, parse_brush(b)));
    return combine_doi(parts, parse_combine_mode(mode));
}

std::vector<fs::path> expand_summaries(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(in))
                if (e.path().extension() == ".gmms") found.push_back(e.path());
            std::sort(found.begin(), found.end());
            if (found.empty()) throw NotFound("no .gmms files in " + in);
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.emplace_back(in);
        }
    }
    return out;
}

std::vector<Summary> load_all(const std::vector<fs::path>& paths) {
    std::vector<Summary> out;
    for (const auto& p : paths) out.push_back(load_summary(p));
    return out;
}

std::size_t label_file_size(const fs::path& p) {
    if (!fs::exists(p)) throw NotFound("no such file: " + p.string());
    return static_cast<std::size_t>(fs::file_size(p) / 4);
}

struct BuildArgs {
    std::string data, clusters, out;
    std::size_t kmeans_k = 0;
    int max_components = 6;
    std::size_t subsample = 200;
    std::uint64_t seed = 0;
    bool skip_pairs = false, outliers = false, unbounded = false;
    unsigned threads = 0;
};

int cmd_build(const BuildArgs& a, std::ostream& out) {
    const Dataset data = load_dataset(a.data);
    Clustering clustering = [&] {
        if (!a.clusters.empty()) return load_clustering(a.clusters, data);
        if (a.kmeans_k == 0) throw InvalidArgument("give either --clusters or --kmeans");
        const auto pos = data.position_dims();
        return kmeans_cluster(data, a.kmeans_k, std::vector<std::size_t>(pos.begin(), pos.end()), a.seed);
    }();
    FitConfig cfg;
    cfg.max_components = a.max_components;
    cfg.subsample_size = a.subsample;
    cfg.seed = a.seed;
    cfg.validate();
    BuildOptions opts;
    opts.compute_outliers = a.outliers;
    opts.bounded_search = !a.unbounded;
    opts.threads = a.threads;
    if (a.skip_pairs) opts.subset_filter = [](const SubsetKey& k) { return k.size() != 2; };
    const auto t0 = std::chrono::steady_clock::now();
    const Summary s = build_summary(data, clustering, cfg, opts);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_summary(s, a.out);
    out << format_stats(summary_stats(s), s.cluster_count()) << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", secs);
    out << "wrote " << a.out << " in " << buf << " s\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Build, inspect and render GMM summaries of clustered point data"};
    app.require_subcommand(1);

    // synthetic
    std::string syn_out;
    std::uint64_t syn_seed = 1;
    auto* syn = app.add_subcommand("synthetic", "Write the ten-cluster synthetic dataset with ground-truth labels");
    syn->add_option("--out", syn_out, "Output directory")->required();
    syn->add_option("--seed", syn_seed, "Random seed");

    // build
    BuildArgs ba;
    auto* build = app.add_subcommand("build", "Fit a summary from a dataset manifest");
    build->add_option("--data", ba.data, "Dataset manifest (JSON)")->required();
    auto* clusters_opt = build->add_option("--clusters", ba.clusters, "Cluster labels (uint32 little endian)");
    build->add_option("--kmeans", ba.kmeans_k, "Cluster by k-means on position with k clusters")
        ->excludes(clusters_opt);
    build->add_option("--max-components", ba.max_components, "Upper bound on components per 1D model");
    build->add_option("--subsample", ba.subsample, "Samples used for the component search");
    build->add_option("--seed", ba.seed, "Random seed");
    build->add_flag("--skip-pairs", ba.skip_pairs, "Do not store 2D models");
    build->add_flag("--outliers", ba.outliers, "Store outlier rankings");
    build->add_flag("--unbounded", ba.unbounded, "Search 1..max-components for 2D/3D models");
    build->add_option("--threads", ba.threads, "Worker threads (0: all cores)");
    build->add_option("--out", ba.out, "Summary file to write")->required();

    // stats
    std::string stats_in;
    bool stats_json = false;
    auto* stats = app.add_subcommand("stats", "Print component and error statistics");
    stats->add_option("summary", stats_in)->required();
    stats->add_flag("--json", stats_json, "Machine readable output");

    // errors
    std::string err_in, err_out;
    bool err_json = false;
    auto* errors = app.add_subcommand("errors", "Per-cluster, per-dimension Wasserstein distances");
    errors->add_option("summary", err_in)->required();
    errors->add_flag("--json", err_json, "JSON instead of CSV");
    errors->add_flag("--csv", "CSV output (default)");
    errors->add_option("--out", err_out, "Write to a file instead of stdout");

    // render
    std::string r_in, r_out, r_camera, r_tf, r_combine = "and";
    std::optional<std::size_t> r_color, r_width, r_height;
    double r_gamma = 1.0, r_nsigma = 3.0;
    std::vector<std::string> r_brushes;
    auto* render = app.add_subcommand("render", "Splat a summary into an image");
    render->add_option("summary", r_in)->required();
    render->add_option("--out", r_out, "Image path (.png or .ppm)")->required();
    render->add_option("--camera", r_camera, "Camera JSON file");
    render->add_option("--tf", r_tf, "Transfer function JSON file");
    render->add_option("--color-dim", r_color, "Dimension mapped through the transfer function");
    render->add_option("--gamma", r_gamma, "Tone mapping gain");
    render->add_option("--width", r_width, "Image width");
    render->add_option("--height", r_height, "Image height");
    render->add_option("--n-sigma", r_nsigma, "Splat footprint in standard deviations");
    render->add_option("--brush", r_brushes, "Brush dim:a:b (repeatable)");
    render->add_option("--combine", r_combine, "and|or for several brushes");

    // plot
    std::vector<std::string> p_in;
    std::string p_kind, p_out, p_dims, p_transfer, p_format = "json", p_combine = "and";
    std::size_t p_bins = 200, p_width = 200, p_height = 200;
    std::optional<double> p_lo, p_hi;
    std::vector<std::string> p_brushes;
    auto* plot = app.add_subcommand("plot", "Export a density grid");
    plot->add_option("summary", p_in, "Summary files (several for timehist)")->required();
    plot->add_option("--kind", p_kind, "density1d|density2d|pcp|timehist")
        ->required()
        ->check(CLI::IsMember({"density1d", "density2d", "pcp", "timehist"}));
    plot->add_option("--dims", p_dims, "Dimension list, comma separated")->required();
    plot->add_option("--bins", p_bins, "Bins for density1d and timehist");
    plot->add_option("--width", p_width, "Grid width");
    plot->add_option("--height", p_height, "Grid height");
    plot->add_option("--lo", p_lo, "Lower extent for 1D plots");
    plot->add_option("--hi", p_hi, "Upper extent for 1D plots");
    plot->add_option("--brush", p_brushes, "Brush dim:a:b applied to the first summary (repeatable)");
    plot->add_option("--combine", p_combine, "and|or for several brushes");
    plot->add_option("--transfer", p_transfer, "Transfer matrices for timehist");
    plot->add_option("--format", p_format, "json or f32")->check(CLI::IsMember({"json", "f32"}));
    plot->add_option("--out", p_out, "Output file")->required();

    // serve
    std::vector<std::string> s_in;
    std::string s_host = "127.0.0.1", s_transfer, s_data, s_clusters;
    int s_port = 8080;
    auto* serve = app.add_subcommand("serve", "Start the HTTP service");
    serve->add_option("summary", s_in, "Summary file(s) or a directory of .gmms files")->required();
    serve->add_option("--host", s_host);
    serve->add_option("--port", s_port);
    serve->add_option("--transfer", s_transfer, "Transfer matrices for a time series");
    serve->add_option("--data", s_data, "Raw dataset for level-of-detail substitution");
    serve->add_option("--clusters", s_clusters, "Cluster labels of the raw dataset");

    // transfer
    std::vector<std::string> t_labels;
    std::string t_out;
    auto* transfer = app.add_subcommand("transfer", "Transfer matrices between consecutive label files");
    transfer->add_option("labels", t_labels, "Label files in time order")->required()->expected(2, -1);
    transfer->add_option("--out", t_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*syn) {
            const auto d = generate_synthetic(syn_seed);
            fs::create_directories(syn_out);
            save_dataset(d.dataset, fs::path(syn_out) / "dataset.json");
            save_clustering(d.clustering, fs::path(syn_out) / "clusters.u32");
            detail::write_file_bytes(fs::path(syn_out) / "noise.u8",
                                     std::string(d.noise_mask.begin(), d.noise_mask.end()));
            out << "wrote " << d.dataset.size() << " samples in " << d.clustering.cluster_count() << " clusters to "
                << syn_out << "\n";
            return 0;
        }
        if (*build) return cmd_build(ba, out);
        if (*stats) {
            const auto s = load_summary(stats_in);
            const auto st = summary_stats(s);
            if (stats_json) {
                out << json{{"clusters", s.cluster_count()},
                            {"gmm_count", st.gmm_count},
                            {"components_mean", st.components_mean},
                            {"components_std", st.components_std},
                            {"wasserstein_mean", st.wasserstein_mean},
                            {"byte_size", st.byte_size},
                            {"wasserstein_per_dim", mean_wasserstein_per_dim(s)}}
                           .dump(2)
                    << "\n";
            } else {
                out << format_stats(st, s.cluster_count()) << "\n";
            }
            return 0;
        }
        if (*errors) {
            const auto s = load_summary(err_in);
            const std::string text = err_json ? error_report_json(s) + "\n" : error_report_csv(s);
            if (err_out.empty()) out << text;
            else detail::write_file_bytes(err_out, text);
            return 0;
        }
        if (*render) {
            const auto s = load_summary(r_in);
            Camera cam = default_camera(s, r_width.value_or(1920), r_height.value_or(1080));
            if (!r_camera.empty()) cam = camera_from_json(detail::read_file_bytes(r_camera), cam);
            if (r_width) cam.width = *r_width;
            if (r_height) cam.height = *r_height;
            cam.validate();
            RenderOptions opts;
            opts.n_sigma = r_nsigma;
            opts.tone.gamma = r_gamma;
            opts.color_dim = r_color.value_or(default_color_dim(s));
            if (s.cluster_count() > 0 && opts.color_dim >= s.dimension_count())
                throw NotFound("unknown dimension " + std::to_string(opts.color_dim));
            const auto tf = r_tf.empty()
                                ? default_transfer_function(s.cluster_count() > 0 ? default_extent(s, opts.color_dim)
                                                                                  : Extent{0.0, 1.0})
                                : transfer_function_from_json(detail::read_file_bytes(r_tf));
            const auto doi = brushes_to_doi(s, r_brushes, r_combine);
            const auto frame = splat_frame(s, cam, lut_for_summary(s, tf, opts.color_dim), doi, opts);
            write_image(frame, r_out, image_format_for(r_out));
            out << "wrote " << frame.width << "x" << frame.height << " image to " << r_out << "\n";
            return 0;
        }
        if (*plot) {
            const auto summaries = load_all(expand_summaries(p_in));
            const Summary& s = summaries.front();
            std::vector<std::size_t> dims;
            {
                std::string tok;
                std::istringstream is(p_dims);
                while (std::getline(is, tok, ','))
                    try {
                        dims.push_back(std::stoul(tok));
                    } catch (const std::logic_error&) {
                        throw InvalidArgument("--dims expects integers");
                    }
            }
            const auto doi = brushes_to_doi(s, p_brushes, p_combine);
            json header{{"kind", p_kind}, {"dims", dims}};
            std::vector<double> values;
            auto extent_1d = [&](std::size_t d) {
                Extent e = default_extent(s, d);
                if (p_lo) e.lo = *p_lo;
                if (p_hi) e.hi = *p_hi;
                return e;
            };
            if (p_kind == "density1d") {
                if (dims.size() != 1) throw InvalidArgument("density1d takes one dimension");
                const auto g = density_1d(s, dims[0], extent_1d(dims[0]), p_bins, doi);
                header["extent"] = {g.extent[0].lo, g.extent[0].hi};
                header["shape"] = {p_bins};
                values = g.values;
            } else if (p_kind == "density2d") {
                if (dims.size() != 2) throw InvalidArgument("density2d takes two dimensions");
                const auto g = density_2d(s, dims[0], dims[1], default_extent(s, dims[0]), default_extent(s, dims[1]),
                                          p_width, p_height, doi);
                header["extent"] = {{g.extent[0].lo, g.extent[0].hi}, {g.extent[1].lo, g.extent[1].hi}};
                header["shape"] = {p_height, p_width};
                values = g.values;
            } else if (p_kind == "pcp") {
                const auto img = pcp_image(s, dims, p_width, p_height, doi);
                const auto full = img.assemble();
                json ex = json::array();
                for (const auto& e : img.extents) ex.push_back({e.lo, e.hi});
                header["extent"] = ex;
                header["shape"] = {p_height, p_width * (dims.size() - 1)};
                values = full;
            } else {
                if (dims.size() != 1) throw InvalidArgument("timehist takes one dimension");
                Extent e{INFINITY, -INFINITY};
                for (const auto& ts : summaries) {
                    const auto x = default_extent(ts, dims[0]);
                    e.lo = std::min(e.lo, x.lo);
                    e.hi = std::max(e.hi, x.hi);
                }
                if (p_lo) e.lo = *p_lo;
                if (p_hi) e.hi = *p_hi;
                std::vector<DoiVector> dois;
                if (!p_brushes.empty()) {
                    const auto mats = p_transfer.empty() ? std::vector<TransferMatrix>{}
                                                         : load_transfer_matrices(p_transfer);
                    if (mats.size() + 1 != summaries.size())
                        throw InvalidArgument("brushing a time histogram needs one transfer matrix per step");
                    dois.push_back(doi);
                    for (const auto& m : mats) dois.push_back(advance_doi(m, dois.back()));
                }
                const auto rows = time_histogram(summaries, dims[0], p_bins, e, dois);
                header["extent"] = {e.lo, e.hi};
                header["shape"] = {rows.size(), p_bins};
                for (const auto& r : rows) values.insert(values.end(), r.begin(), r.end());
            }
            if (p_format == "json") {
                header["values"] = values;
                detail::write_file_bytes(p_out, header.dump() + "\n");
            } else {
                header["dtype"] = "float32le";
                std::vector<float> f(values.begin(), values.end());
                detail::write_le_array<float>(fs::path(p_out), f);
                detail::write_file_bytes(p_out + ".json", header.dump(2) + "\n");
            }
            out << "wrote " << p_kind << " (" << values.size() << " values) to " << p_out << "\n";
            return 0;
        }
        if (*serve) {
            auto summaries = load_all(expand_summaries(s_in));
            std::vector<TransferMatrix> mats;
            if (!s_transfer.empty()) mats = load_transfer_matrices(s_transfer);
            else if (s_in.size() == 1 && fs::is_directory(s_in[0]) && fs::exists(fs::path(s_in[0]) / "transfer.json"))
                mats = load_transfer_matrices(fs::path(s_in[0]) / "transfer.json");
            Service service(std::move(summaries), std::move(mats));
            if (!s_data.empty()) {
                Dataset d = load_dataset(s_data);
                if (s_clusters.empty()) throw InvalidArgument("--data needs --clusters");
                Clustering c = load_clustering(s_clusters, d);
                service.attach_raw_data(std::move(d), std::move(c));
            }
            service.serve(s_host, s_port);
            return 0;
        }
        if (*transfer) {
            std::vector<Clustering> cs;
            for (const auto& p : t_labels) cs.push_back(load_clustering(p, label_file_size(p)));
            std::vector<TransferMatrix> mats;
            for (std::size_t t = 0; t + 1 < cs.size(); ++t) mats.push_back(build_transfer_matrix(cs[t], cs[t + 1]));
            save_transfer_matrices(mats, t_out);
            out << "wrote " << mats.size() << " transfer matrices to " << t_out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace gmmsum
