#include "gmmsum/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "binary_io.hpp"
#include "gmmsum/error.hpp"

namespace gmmsum {

using nlohmann::json;

void validate_doi(std::span<const double> doi) {
    for (double v : doi)
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("degree of interest must lie in [0, 1]");
}

DoiVector brush_doi(const Summary& summary, const Brush& brush) {
    if (brush.dim >= summary.dimension_count()) throw NotFound("unknown dimension " + std::to_string(brush.dim));
    if (std::isnan(brush.a) || std::isnan(brush.b) || brush.a > brush.b)
        throw InvalidArgument("brush range must satisfy a <= b");
    DoiVector doi;
    doi.reserve(summary.cluster_count());
    for (const auto& cs : summary.clusters) {
        const Gmm& g = cs.gmm_1d(brush.dim);
        doi.push_back(std::clamp(gmm_cdf_1d(g, brush.b) - gmm_cdf_1d(g, brush.a), 0.0, 1.0));
    }
    return doi;
}

CombineMode parse_combine_mode(const std::string& text) {
    if (text == "and") return CombineMode::conjunction;
    if (text == "or") return CombineMode::disjunction;
    throw InvalidArgument("unknown combine mode '" + text + "' (use and/or)");
}

DoiVector combine_doi(std::span<const DoiVector> dois, CombineMode mode) {
    if (dois.empty()) throw InvalidArgument("combine_doi needs at least one input");
    DoiVector out = dois.front();
    for (const auto& d : dois.subspan(1)) {
        if (d.size() != out.size()) throw DimensionMismatch("DOI vectors differ in length");
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = mode == CombineMode::conjunction ? std::min(out[i], d[i]) : std::max(out[i], d[i]);
    }
    return out;
}

TransferMatrix::TransferMatrix(std::size_t rows, std::size_t cols,
                               std::vector<std::tuple<std::size_t, std::size_t, double>> triples)
    : rows_(rows), cols_(cols) {
    std::sort(triples.begin(), triples.end(),
              [](const auto& x, const auto& y) { return std::tie(std::get<0>(x), std::get<1>(x)) < std::tie(std::get<0>(y), std::get<1>(y)); });
    row_ptr_.assign(rows + 1, 0);
    for (std::size_t k = 0; k < triples.size(); ++k) {
        const auto [r, c, v] = triples[k];
        if (r >= rows || c >= cols) throw InvalidArgument("transfer matrix entry out of range");
        if (!std::isfinite(v)) throw InvalidArgument("transfer matrix entries must be finite");
        if (k > 0 && std::get<0>(triples[k - 1]) == r && std::get<1>(triples[k - 1]) == c)
            throw InvalidArgument("duplicate transfer matrix entry");
        ++row_ptr_[r + 1];
        col_idx_.push_back(c);
        values_.push_back(v);
    }
    for (std::size_t r = 0; r < rows; ++r) row_ptr_[r + 1] += row_ptr_[r];
}

TransferMatrix TransferMatrix::identity(std::size_t n) {
    std::vector<std::tuple<std::size_t, std::size_t, double>> t;
    for (std::size_t i = 0; i < n; ++i) t.emplace_back(i, i, 1.0);
    return TransferMatrix(n, n, std::move(t));
}

double TransferMatrix::at(std::size_t r, std::size_t c) const {
    if (r >= rows_ || c >= cols_) throw InvalidArgument("index out of range");
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
        if (col_idx_[k] == c) return values_[k];
    return 0.0;
}

std::vector<double> TransferMatrix::row_sums() const {
    std::vector<double> s(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s[r] += values_[k];
    return s;
}

std::vector<std::tuple<std::size_t, std::size_t, double>> TransferMatrix::triples() const {
    std::vector<std::tuple<std::size_t, std::size_t, double>> t;
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) t.emplace_back(r, col_idx_[k], values_[k]);
    return t;
}

std::vector<double> TransferMatrix::apply(std::span<const double> x) const {
    if (x.size() != cols_) throw DimensionMismatch("vector length differs from the matrix column count");
    std::vector<double> y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) y[r] += values_[k] * x[col_idx_[k]];
    return y;
}

TransferMatrix TransferMatrix::then(const TransferMatrix& next) const {
    if (next.cols_ != rows_) throw DimensionMismatch("transfer matrices do not chain");
    std::vector<std::tuple<std::size_t, std::size_t, double>> out;
    for (std::size_t r = 0; r < next.rows_; ++r) {
        std::map<std::size_t, double> acc;
        for (std::size_t k = next.row_ptr_[r]; k < next.row_ptr_[r + 1]; ++k) {
            const std::size_t mid = next.col_idx_[k];
            for (std::size_t q = row_ptr_[mid]; q < row_ptr_[mid + 1]; ++q)
                acc[col_idx_[q]] += next.values_[k] * values_[q];
        }
        for (const auto& [c, v] : acc)
            if (v != 0.0) out.emplace_back(r, c, v);
    }
    return TransferMatrix(next.rows_, cols_, std::move(out));
}

TransferMatrix build_transfer_matrix(const Clustering& current, const Clustering& next,
                                     std::span<const std::uint8_t> present_at_t) {
    if (current.size() != next.size()) throw LengthMismatch("clusterings cover different sample counts");
    if (!present_at_t.empty() && present_at_t.size() != next.size())
        throw LengthMismatch("presence mask length differs from the sample count");
    const auto from = current.labels();
    const auto to = next.labels();
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
    for (std::size_t i = 0; i < to.size(); ++i)
        if (present_at_t.empty() || present_at_t[i]) ++counts[{to[i], from[i]}];
    std::vector<std::tuple<std::size_t, std::size_t, double>> triples;
    triples.reserve(counts.size());
    for (const auto& [rc, n] : counts)
        triples.emplace_back(rc.first, rc.second,
                             static_cast<double>(n) / static_cast<double>(next.members(rc.first).size()));
    return TransferMatrix(next.cluster_count(), current.cluster_count(), std::move(triples));
}

DoiVector advance_doi(const TransferMatrix& m, std::span<const double> doi) {
    auto out = m.apply(doi);
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
    return out;
}

void save_transfer_matrices(const std::vector<TransferMatrix>& matrices, const std::filesystem::path& path) {
    json list = json::array();
    for (const auto& m : matrices) {
        json triples = json::array();
        for (const auto& [r, c, v] : m.triples()) triples.push_back(json::array({r, c, v}));
        list.push_back({{"rows", m.rows()}, {"cols", m.cols()}, {"triples", triples}});
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    detail::write_file_bytes(path, json{{"version", 1}, {"matrices", list}}.dump() + "\n");
}

std::vector<TransferMatrix> load_transfer_matrices(const std::filesystem::path& path) {
    try {
        const json doc = json::parse(detail::read_file_bytes(path));
        if (doc.at("version").get<int>() != 1) throw VersionError("unsupported transfer matrix file version");
        std::vector<TransferMatrix> out;
        for (const auto& m : doc.at("matrices")) {
            std::vector<std::tuple<std::size_t, std::size_t, double>> triples;
            for (const auto& t : m.at("triples"))
                triples.emplace_back(t.at(0).get<std::size_t>(), t.at(1).get<std::size_t>(), t.at(2).get<double>());
            out.emplace_back(m.at("rows").get<std::size_t>(), m.at("cols").get<std::size_t>(), std::move(triples));
        }
        return out;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace gmmsum
