#include "gmmsum/fitting.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "gmmsum/error.hpp"
#include "gmmsum/random.hpp"

namespace gmmsum {

void FitConfig::validate() const {
    if (max_components < 1) throw InvalidArgument("max_components must be positive");
    if (subsample_size < 1) throw InvalidArgument("subsample_size must be positive");
    if (em_max_iters < 1) throw InvalidArgument("em_max_iters must be positive");
    if (!(em_tol > 0.0)) throw InvalidArgument("em_tol must be positive");
    if (tiny_cluster_threshold < 1) throw InvalidArgument("tiny_cluster_threshold must be positive");
    if (restarts < 1) throw InvalidArgument("restarts must be positive");
    if (subsample_size < tiny_cluster_threshold)
        throw InvalidArgument("subsample_size must be at least tiny_cluster_threshold");
}

long free_parameter_count(int k, int d, WeightParamRule rule) {
    if (k < 1 || d < 1) throw InvalidArgument("free_parameter_count needs k >= 1 and d >= 1");
    const long per_component = static_cast<long>(d) * (d + 1) / 2 + d;
    const long weights = rule == WeightParamRule::simplex ? k - 1 : d - 1;
    return k * per_component + weights;
}

double bic(double log_likelihood, int k, int d, std::size_t n, WeightParamRule rule) {
    if (n < 1) throw InvalidArgument("bic needs n >= 1");
    return -2.0 * log_likelihood +
           static_cast<double>(free_parameter_count(k, d, rule)) * std::log(static_cast<double>(n));
}

std::pair<int, int> component_bounds(const std::map<std::size_t, int>& one_d_counts,
                                     std::span<const std::size_t> dims, int max_components) {
    if (dims.empty()) throw InvalidArgument("component_bounds needs at least one dimension");
    int k_min = std::numeric_limits<int>::max();
    long k_max = 1;
    for (std::size_t dim : dims) {
        auto it = one_d_counts.find(dim);
        if (it == one_d_counts.end()) throw NotFound("no one-dimensional component count for dimension " + std::to_string(dim));
        if (it->second < 1) throw InvalidArgument("component counts must be positive");
        k_min = std::min(k_min, it->second);
        k_max = std::min<long>(k_max * it->second, 1L << 30);
    }
    if (dims.size() > 1) k_max = std::min<long>(k_max, static_cast<long>(max_components) * max_components);
    k_max = std::max<long>(k_max, k_min);
    return {k_min, static_cast<int>(k_max)};
}

namespace {

struct Floors {
    std::vector<double> variance;  // per coordinate
};

Floors variance_floors(const PointSet& x) {
    const std::size_t d = x.dim();
    std::vector<double> lo(d, INFINITY), hi(d, -INFINITY);
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t c = 0; c < d; ++c) {
            lo[c] = std::min(lo[c], x[i][c]);
            hi[c] = std::max(hi[c], x[i][c]);
        }
    Floors f;
    f.variance.resize(d);
    for (std::size_t c = 0; c < d; ++c) {
        const double range = hi[c] - lo[c];
        const double scale = range > 0.0 ? range : std::max({1.0, std::abs(lo[c]), std::abs(hi[c])});
        f.variance[c] = (1e-6 * scale) * (1e-6 * scale);
    }
    return f;
}

// Weighted mean/covariance of the points with responsibilities resp[i*k + j].
GaussianComponent m_step_component(const PointSet& x, std::span<const double> resp, std::size_t k, std::size_t j,
                                   const Floors& floors, std::span<const double> fallback_mean) {
    const std::size_t n = x.size();
    const std::size_t d = x.dim();
    double nk = 0.0;
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * k + j];
        if (r == 0.0) continue;
        nk += r;
        const auto p = x[i];
        for (std::size_t c = 0; c < d; ++c) mean[c] += r * p[c];
    }
    Matrix cov(d, d);
    if (nk > 0.0) {
        for (double& m : mean) m /= nk;
        std::vector<double> diff(d);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = resp[i * k + j];
            if (r == 0.0) continue;
            const auto p = x[i];
            for (std::size_t c = 0; c < d; ++c) diff[c] = p[c] - mean[c];
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b <= a; ++b) cov(a, b) += r * diff[a] * diff[b];
        }
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b <= a; ++b) {
                cov(a, b) /= nk;
                cov(b, a) = cov(a, b);
            }
    } else {
        mean.assign(fallback_mean.begin(), fallback_mean.end());
    }
    for (std::size_t c = 0; c < d; ++c) cov(c, c) = std::max(cov(c, c), floors.variance[c]);
    const double weight = (nk + 10.0 * DBL_EPSILON) / static_cast<double>(n);
    return GaussianComponent(weight, std::move(mean), cov);
}

// E-step: fills resp (n x k) and returns the log-likelihood.
double e_step(const PointSet& x, const std::vector<GaussianComponent>& comps, std::vector<double>& resp) {
    const std::size_t n = x.size();
    const std::size_t d = x.dim();
    const std::size_t k = comps.size();
    resp.resize(n * k);
    std::vector<double> log_norm(k);
    std::vector<const double*> inv(k);
    std::vector<const double*> mu(k);
    for (std::size_t j = 0; j < k; ++j) {
        log_norm[j] = std::log(comps[j].weight()) - 0.5 * (static_cast<double>(d) * kLog2Pi + comps[j].log_det());
        inv[j] = comps[j].inverse().values().data();
        mu[j] = comps[j].mean().data();
    }
    double ll = 0.0;
    double diff[16];
    std::vector<double> heap;
    double* dx = diff;
    if (d > 16) {
        heap.resize(d);
        dx = heap.data();
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = x[i];
        double* r = resp.data() + i * k;
        double best = -INFINITY;
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t c = 0; c < d; ++c) dx[c] = p[c] - mu[j][c];
            double q = 0.0;
            for (std::size_t a = 0; a < d; ++a) {
                double row = 0.0;
                for (std::size_t b = 0; b < d; ++b) row += inv[j][a * d + b] * dx[b];
                q += dx[a] * row;
            }
            r[j] = log_norm[j] - 0.5 * std::max(q, 0.0);
            best = std::max(best, r[j]);
        }
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            r[j] = std::exp(r[j] - best);
            s += r[j];
        }
        const double inv_s = 1.0 / s;
        for (std::size_t j = 0; j < k; ++j) r[j] *= inv_s;
        ll += best + std::log(s);
    }
    return ll;
}

std::vector<double> kmeans_pp_centers(const PointSet& x, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = x.size();
    const std::size_t d = x.dim();
    std::vector<double> centers;
    centers.reserve(k * d);
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    const auto p0 = x[first(rng)];
    centers.insert(centers.end(), p0.begin(), p0.end());
    std::vector<double> dist(n, INFINITY);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t c = 1; c < k; ++c) {
        const double* last = centers.data() + (c - 1) * d;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t a = 0; a < d; ++a) {
                const double t = x[i][a] - last[a];
                s += t * t;
            }
            dist[i] = std::min(dist[i], s);
            total += dist[i];
        }
        std::size_t chosen = n - 1;
        if (total > 0.0) {
            double target = unit(rng) * total;
            for (std::size_t i = 0; i < n; ++i) {
                target -= dist[i];
                if (target <= 0.0 && dist[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = first(rng);
        }
        const auto p = x[chosen];
        centers.insert(centers.end(), p.begin(), p.end());
    }
    return centers;
}

std::vector<GaussianComponent> initial_components(const PointSet& x, std::size_t k, std::mt19937_64& rng,
                                                  const Floors& floors) {
    const std::size_t n = x.size();
    const std::size_t d = x.dim();
    std::vector<double> centers = kmeans_pp_centers(x, k, rng);
    std::vector<std::size_t> label(n, 0);
    for (int it = 0; it < 10; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = INFINITY;
            std::size_t arg = 0;
            for (std::size_t j = 0; j < k; ++j) {
                double s = 0.0;
                for (std::size_t a = 0; a < d; ++a) {
                    const double t = x[i][a] - centers[j * d + a];
                    s += t * t;
                }
                if (s < best) {
                    best = s;
                    arg = j;
                }
            }
            changed = changed || label[i] != arg || it == 0;
            label[i] = arg;
        }
        if (!changed) break;
        std::vector<double> sum(k * d, 0.0);
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++count[label[i]];
            for (std::size_t a = 0; a < d; ++a) sum[label[i] * d + a] += x[i][a];
        }
        for (std::size_t j = 0; j < k; ++j)
            if (count[j] > 0)
                for (std::size_t a = 0; a < d; ++a) centers[j * d + a] = sum[j * d + a] / static_cast<double>(count[j]);
    }
    std::vector<double> resp(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) resp[i * k + label[i]] = 1.0;
    std::vector<GaussianComponent> comps;
    comps.reserve(k);
    for (std::size_t j = 0; j < k; ++j)
        comps.push_back(m_step_component(x, resp, k, j, floors, std::span<const double>(centers.data() + j * d, d)));
    return comps;
}

struct EmRun {
    std::vector<GaussianComponent> components;
    double log_likelihood = -INFINITY;
    std::vector<double> trace;
    int iterations = 0;
};

EmRun run_em(const PointSet& x, std::size_t k, std::uint64_t seed, const FitConfig& config, const Floors& floors) {
    std::mt19937_64 rng(seed);
    EmRun run;
    run.components = initial_components(x, k, rng, floors);
    std::vector<double> resp;
    double ll = e_step(x, run.components, resp);
    run.trace.push_back(ll);
    for (int it = 0; it < config.em_max_iters; ++it) {
        std::vector<GaussianComponent> next;
        next.reserve(k);
        for (std::size_t j = 0; j < k; ++j) next.push_back(m_step_component(x, resp, k, j, floors, run.components[j].mean()));
        const double next_ll = e_step(x, next, resp);
        run.components = std::move(next);
        run.trace.push_back(next_ll);
        run.iterations = it + 1;
        const double change = std::abs(next_ll - ll);
        ll = next_ll;
        if (change <= config.em_tol * std::abs(ll)) break;
    }
    run.log_likelihood = ll;
    return run;
}

FitResult single_gaussian(const PointSet& x, const FitConfig& config, const Floors& floors) {
    const std::size_t n = x.size();
    std::vector<double> resp(n, 1.0);
    std::vector<GaussianComponent> comps;
    const std::vector<double> zero(x.dim(), 0.0);
    // Closed-form maximum likelihood; weight is exactly one.
    GaussianComponent g = m_step_component(x, resp, 1, 0, floors, zero).with_weight(1.0);
    comps.push_back(g);
    std::vector<double> scratch;
    const double ll = e_step(x, comps, scratch);
    FitResult r{Gmm(std::move(comps)), 0.0, 0.0, {}, {}, 0, false};
    r.log_likelihood = ll;
    r.bic = bic(ll, 1, static_cast<int>(x.dim()), n, config.weight_rule);
    r.log_likelihood_trace = {ll};
    return r;
}

bool all_identical(const PointSet& x) {
    for (std::size_t i = 1; i < x.size(); ++i)
        for (std::size_t c = 0; c < x.dim(); ++c)
            if (x[i][c] != x[0][c]) return false;
    return true;
}

}  // namespace

FitResult fit_em(const PointSet& samples, int k, std::uint64_t seed, const FitConfig& config) {
    if (k < 1) throw InvalidArgument("fit_em needs k >= 1");
    if (samples.size() < static_cast<std::size_t>(k)) throw InvalidArgument("fit_em needs at least k samples");
    for (double v : samples.values())
        if (!std::isfinite(v)) throw InvalidArgument("fit_em samples must be finite");
    const Floors floors = variance_floors(samples);
    if (k == 1) return single_gaussian(samples, config, floors);
    if (all_identical(samples)) {
        FitResult r = single_gaussian(samples, config, floors);
        r.degenerate = true;
        return r;
    }

    EmRun best;
    for (int restart = 0; restart < config.restarts; ++restart) {
        EmRun run = run_em(samples, static_cast<std::size_t>(k), derive_seed(seed, {static_cast<std::uint64_t>(restart)}),
                           config, floors);
        if (best.components.empty() || run.log_likelihood > best.log_likelihood) best = std::move(run);
    }
    FitResult r{Gmm(std::move(best.components)), 0.0, 0.0, {}, {}, 0, false};
    r.log_likelihood = best.log_likelihood;
    r.bic = bic(best.log_likelihood, k, static_cast<int>(samples.dim()), samples.size(), config.weight_rule);
    r.log_likelihood_trace = std::move(best.trace);
    r.iterations = best.iterations;
    return r;
}

FitResult select_components(const PointSet& samples, std::pair<int, int> k_range, const FitConfig& config,
                            std::uint64_t stream) {
    config.validate();
    if (samples.empty()) throw InvalidArgument("select_components needs at least one sample");
    auto [k_min, k_max] = k_range;
    if (k_min < 1 || k_max < k_min) throw InvalidArgument("invalid component range");
    const std::size_t n = samples.size();
    if (n <= config.tiny_cluster_threshold) {
        FitResult r = fit_em(samples, 1, derive_seed(config.seed, {stream, 1}), config);
        r.k_search_trace = {{1, r.bic}};
        return r;
    }

    const bool subsampled = n > config.subsample_size;
    PointSet subset(samples.dim());
    if (subsampled) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::mt19937_64 rng(derive_seed(config.seed, {stream, 0x5ab5a3b1eULL}));
        for (std::size_t i = 0; i < config.subsample_size; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        idx.resize(config.subsample_size);
        std::sort(idx.begin(), idx.end());
        subset.reserve(idx.size());
        for (std::size_t i : idx) subset.push_back(samples[i]);
    }
    const PointSet& search = subsampled ? subset : samples;

    std::vector<std::pair<int, double>> trace;
    std::optional<FitResult> best;
    int best_k = 0;
    for (int k = k_min; k <= k_max && static_cast<std::size_t>(k) <= search.size(); ++k) {
        FitResult r = fit_em(search, k, derive_seed(config.seed, {stream, static_cast<std::uint64_t>(k)}), config);
        const int effective_k = static_cast<int>(r.gmm.size());
        trace.emplace_back(k, r.bic);
        if (!best || r.bic < best->bic) {
            best_k = effective_k == k ? k : effective_k;
            best = std::move(r);
        }
    }
    if (!best) {
        const int k = std::clamp(k_min, 1, static_cast<int>(search.size()));
        best = fit_em(search, k, derive_seed(config.seed, {stream, static_cast<std::uint64_t>(k)}), config);
        best_k = k;
        trace.emplace_back(k, best->bic);
    }
    if (subsampled) {
        best = fit_em(samples, best_k, derive_seed(config.seed, {stream, static_cast<std::uint64_t>(best_k)}), config);
    }
    best->k_search_trace = std::move(trace);
    return std::move(*best);
}

}  // namespace gmmsum
