#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "gmmsum/gmm.hpp"
#include "gmmsum/point_set.hpp"

namespace gmmsum {

// How mixture weights enter the BIC free-parameter count.
enum class WeightParamRule {
    simplex,             // K - 1 free weights
    printed_dimension,   // |D| - 1 instead; kept for comparison
};

struct FitConfig {
    int max_components = 6;
    std::size_t subsample_size = 200;
    int em_max_iters = 200;
    double em_tol = 1e-6;  // relative log-likelihood change
    std::size_t tiny_cluster_threshold = 20;
    int restarts = 3;
    std::uint64_t seed = 0;
    WeightParamRule weight_rule = WeightParamRule::simplex;

    // Throws InvalidArgument when a field is out of range.
    void validate() const;

    bool operator==(const FitConfig&) const = default;
};

struct FitResult {
    Gmm gmm;
    double log_likelihood = 0.0;
    double bic = 0.0;
    std::vector<std::pair<int, double>> k_search_trace;  // (K, BIC) per evaluated K
    std::vector<double> log_likelihood_trace;            // per EM iteration of the returned run
    int iterations = 0;
    bool degenerate = false;  // all samples identical; fell back to one component
};

// EM for a K-component mixture with k-means++ initialization; the best of
// config.restarts runs (by final log-likelihood) is returned.
FitResult fit_em(const PointSet& samples, int k, std::uint64_t seed, const FitConfig& config);

long free_parameter_count(int k, int d, WeightParamRule rule = WeightParamRule::simplex);

double bic(double log_likelihood, int k, int d, std::size_t n, WeightParamRule rule = WeightParamRule::simplex);

// k_min = min_i K_i, k_max = prod_i K_i over the dims, with k_max clamped to
// max_components^2 when more than one dimension is involved.
std::pair<int, int> component_bounds(const std::map<std::size_t, int>& one_d_counts,
                                     std::span<const std::size_t> dims, int max_components);

// BIC model selection over K in k_range. Tiny inputs get a single Gaussian.
// Larger inputs are searched on a subsample of config.subsample_size points
// and the winning K is refit on all samples. `stream` separates the random
// streams of independent selection tasks sharing one config.seed.
FitResult select_components(const PointSet& samples, std::pair<int, int> k_range, const FitConfig& config,
                            std::uint64_t stream = 0);

}  // namespace gmmsum
