#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "gmmsum/dataset.hpp"
#include "gmmsum/summary.hpp"

namespace gmmsum {

// Degree of interest per cluster, each entry in [0, 1].
using DoiVector = std::vector<double>;

void validate_doi(std::span<const double> doi);

struct Brush {
    std::size_t dim = 0;
    double a = 0.0;
    double b = 0.0;
};

// Probability mass of each cluster's 1D model of brush.dim inside [a, b].
DoiVector brush_doi(const Summary& summary, const Brush& brush);

enum class CombineMode { conjunction, disjunction };  // element-wise min / max
CombineMode parse_combine_mode(const std::string& text);  // "and" / "or"

DoiVector combine_doi(std::span<const DoiVector> dois, CombineMode mode);

// Sparse (CSR) matrix of shape (clusters at t+1) x (clusters at t).
class TransferMatrix {
public:
    TransferMatrix() = default;
    TransferMatrix(std::size_t rows, std::size_t cols, std::vector<std::tuple<std::size_t, std::size_t, double>> triples);
    static TransferMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nonzeros() const { return values_.size(); }
    double at(std::size_t r, std::size_t c) const;
    std::vector<double> row_sums() const;
    std::vector<std::tuple<std::size_t, std::size_t, double>> triples() const;

    std::vector<double> apply(std::span<const double> x) const;
    // (next * this): transfer over this step and then over next.
    TransferMatrix then(const TransferMatrix& next) const;

    bool operator==(const TransferMatrix&) const = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

// Entry (j, l) = |C_l^t intersect C_j^{t+1}| / |C_j^{t+1}|, built in one pass
// over the labels. present_at_t, when given, marks samples that existed at t;
// samples born later only enlarge the row denominators.
TransferMatrix build_transfer_matrix(const Clustering& current, const Clustering& next,
                                     std::span<const std::uint8_t> present_at_t = {});

// doi' = M doi, clamped into [0, 1] against rounding.
DoiVector advance_doi(const TransferMatrix& m, std::span<const double> doi);

// Companion file: {"version":1,"matrices":[{"rows","cols","triples":[[r,c,v],...]}]}
void save_transfer_matrices(const std::vector<TransferMatrix>& matrices, const std::filesystem::path& path);
std::vector<TransferMatrix> load_transfer_matrices(const std::filesystem::path& path);

}  // namespace gmmsum
