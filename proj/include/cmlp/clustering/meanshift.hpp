#pragma once

#include <cmath>
#include <vector>

#include "cmlp/clustering/result.hpp"
#include "cmlp/core/error.hpp"
#include "cmlp/core/stopwatch.hpp"

namespace cmlp {

struct MeanShiftConfig {
    double bandwidth = 1.0;
    double shift_tol = 1e-6;
    std::size_t max_iter = 500;
    /// 0 selects bandwidth / 2.
    double merge_radius = 0.0;

    double effective_merge_radius() const { return merge_radius > 0.0 ? merge_radius : bandwidth / 2.0; }

    void validate() const {
        if (!(bandwidth > 0.0)) throw ConfigError("meanshift: bandwidth must be positive");
        if (!(shift_tol > 0.0)) throw ConfigError("meanshift: shift_tol must be positive");
        if (max_iter < 1) throw ConfigError("meanshift: max_iter must be positive");
        if (merge_radius < 0.0) throw ConfigError("meanshift: merge_radius must be positive");
    }
};

/// Unnormalized Gaussian kernel density (1/n) sum_i exp(-|y - x_i|^2 / (2 h^2)).
inline double kernel_density(const Matrix& points, std::span<const double> y, double bandwidth) {
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    double s = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) s += std::exp(-squared_distance(points.row(i), y) * inv);
    return s / static_cast<double>(points.rows());
}

/// One Gaussian-weighted mean update of `y`; returns the shift length.
inline double mean_shift_step(const Matrix& points, std::span<double> y, double bandwidth,
                              std::vector<double>& scratch) {
    const std::size_t d = points.cols();
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    scratch.assign(d, 0.0);
    double wsum = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const auto p = points.row(i);
        const double w = std::exp(-squared_distance(p, y) * inv);
        wsum += w;
        for (std::size_t j = 0; j < d; ++j) scratch[j] += w * p[j];
    }
    // All weights underflowed: y sits far from every point and stays put.
    if (wsum <= 0.0) return 0.0;
    double shift2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double v = scratch[j] / wsum;
        shift2 += (v - y[j]) * (v - y[j]);
        y[j] = v;
    }
    return std::sqrt(shift2);
}

/// Mean-shift mode seeking with a Gaussian kernel.
///
/// Every point climbs to an attractor. Attractors are grouped greedily in
/// input order: each joins the first existing group whose founding attractor
/// lies within merge_radius. A group's mode is its attractor of highest
/// kernel density, and labels follow basin membership.
inline ClusteringResult meanshift(const Matrix& points, const MeanShiftConfig& cfg) {
    cfg.validate();
    Stopwatch clock;
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    const double merge2 = cfg.effective_merge_radius() * cfg.effective_merge_radius();

    Matrix attractors = points;
    std::vector<double> scratch;
    for (std::size_t i = 0; i < n; ++i) {
        auto y = attractors.row(i);
        for (std::size_t it = 0; it < cfg.max_iter; ++it)
            if (mean_shift_step(points, y, cfg.bandwidth, scratch) < cfg.shift_tol) break;
    }

    std::vector<std::size_t> founders;
    std::vector<std::size_t> best;
    std::vector<double> best_density;
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto a = attractors.row(i);
        std::size_t g = 0;
        while (g < founders.size() && squared_distance(a, attractors.row(founders[g])) > merge2) ++g;
        const double dens = kernel_density(points, a, cfg.bandwidth);
        if (g == founders.size()) {
            founders.push_back(i);
            best.push_back(i);
            best_density.push_back(dens);
        } else if (dens > best_density[g]) {
            best[g] = i;
            best_density[g] = dens;
        }
        labels[i] = static_cast<int>(g);
    }

    ClusteringResult r;
    r.k = founders.size();
    r.labels = std::move(labels);
    r.representatives = Matrix(r.k, d);
    for (std::size_t g = 0; g < r.k; ++g) {
        const auto src = attractors.row(best[g]);
        std::copy(src.begin(), src.end(), r.representatives.row(g).begin());
    }
    r.algorithm = Algorithm::MeanShift;
    r.elapsed_seconds = clock.seconds();
    return r;
}

} // namespace cmlp
