#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gmmsum/dataset.hpp"
#include "gmmsum/density.hpp"
#include "gmmsum/interaction.hpp"
#include "gmmsum/lod.hpp"
#include "gmmsum/render.hpp"
#include "gmmsum/summary.hpp"

namespace gmmsum {

struct Request {
    std::string method;  // GET, POST, DELETE
    std::string path;    // e.g. /api/density1d
    std::map<std::string, std::string> query;
    std::string body;
};

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

struct ServiceConfig {
    std::size_t frame_width = 1920;
    std::size_t frame_height = 1080;
    std::size_t density_bins = 200;
    std::size_t grid_width = 200;
    std::size_t grid_height = 200;
    std::size_t pcp_width = 800;
    std::size_t pcp_height = 300;
};

struct SessionState {
    std::vector<Brush> brushes;
    DoiVector doi;
    std::size_t timestep = 0;
    double gamma = 1.0;
    std::optional<double> lod_threshold;
};

// One loaded summary (or a time series of them) plus the mutable session.
// handle() is safe to call from several threads; mutations are serialized.
class Service {
public:
    explicit Service(Summary summary, ServiceConfig config = {});
    Service(std::vector<Summary> timesteps, std::vector<TransferMatrix> transfers, ServiceConfig config = {});

    // Raw samples of timestep 0, required by /api/lod.
    void attach_raw_data(Dataset dataset, Clustering clustering);

    Response handle(const Request& request);
    SessionState session() const;

    // Blocks until the server stops.
    void serve(const std::string& host, int port);

private:
    Response dispatch(const Request& request);
    Response get_summary() const;
    Response get_density1d(const Request& request) const;
    Response get_density2d(const Request& request) const;
    Response get_pcp(const Request& request) const;
    Response get_timehist(const Request& request) const;
    Response get_frame(const Request& request) const;
    Response get_errors() const;
    Response post_brush(const Request& request);
    Response delete_brush();
    Response post_timestep(const Request& request);
    Response post_lod(const Request& request);

    const Summary& current() const { return timesteps_[state_.timestep]; }
    std::vector<DoiVector> doi_per_timestep() const;
    std::unique_ptr<LodSubstitution> lod() const;

    std::vector<Summary> timesteps_;
    std::vector<TransferMatrix> transfers_;
    ServiceConfig config_;
    std::unique_ptr<Dataset> dataset_;
    std::unique_ptr<Clustering> clustering_;
    SessionState state_;
    mutable std::mutex mutex_;
};

// {"eye":[x,y,z],"look_at":[...],"up":[...],"fov_deg":45,"width":W,"height":H};
// missing fields keep the values of base.
Camera camera_from_json(const std::string& text, const Camera& base);
// {"points":[{"value":v,"rgba":[r,g,b,a]},...]}
TransferFunction transfer_function_from_json(const std::string& text);

// DOI moved one step backward: entry (l, j) = |C_l^t intersect C_j^{t+1}| / |C_l^t|,
// derived from m and the cluster sizes of both frames.
DoiVector retreat_doi(const TransferMatrix& m, std::span<const double> doi_next, const Summary& at_t,
                      const Summary& at_next);

}  // namespace gmmsum
