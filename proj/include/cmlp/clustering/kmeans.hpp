#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "cmlp/clustering/result.hpp"
#include "cmlp/core/error.hpp"
#include "cmlp/core/matrix.hpp"
#include "cmlp/core/random.hpp"
#include "cmlp/core/stopwatch.hpp"

namespace cmlp {

/// Trace of one Lloyd run.
struct LloydRun {
    std::vector<int> labels;
    Matrix centroids;
    /// WCSS after each completed iteration (assignment + update).
    std::vector<double> wcss_history;
    std::size_t iterations = 0;
    bool converged = false;

    double wcss() const { return wcss_history.empty() ? 0.0 : wcss_history.back(); }
};

inline double within_cluster_ss(const Matrix& points, std::span<const int> labels, const Matrix& centroids) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i)
        s += squared_distance(points.row(i), centroids.row(static_cast<std::size_t>(labels[i])));
    return s;
}

/// Distance-weighted seeding: first center uniform, then each next center
/// drawn with probability proportional to the squared distance to the
/// nearest chosen center.
inline Matrix kmeans_plusplus_init(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows();
    Matrix centers(k, points.cols());
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::size_t pick = rng.index(n);
    for (std::size_t c = 0; c < k; ++c) {
        auto dst = centers.row(c);
        auto src = points.row(pick);
        std::copy(src.begin(), src.end(), dst.begin());
        if (c + 1 == k) break;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(points.row(i), dst));
            total += nearest[i];
        }
        if (total <= 0.0) {
            // Every point coincides with a chosen center; fall back to uniform picks.
            pick = rng.index(n);
            continue;
        }
        double target = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            target -= nearest[i];
            if (target < 0.0 && nearest[i] > 0.0) {
                pick = i;
                break;
            }
        }
    }
    return centers;
}

/// Lloyd iterations from the given centroids.
///
/// Stops when no label changes or the largest centroid move is below `tol`.
/// A cluster left empty by assignment takes over the point farthest from its
/// centroid among clusters with more than one member, so every cluster stays
/// populated while n >= k.
inline LloydRun lloyd(const Matrix& points, Matrix centroids, std::size_t max_iter, double tol) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    const std::size_t k = centroids.rows();

    LloydRun run;
    run.labels.assign(n, -1);
    std::vector<std::size_t> sizes(k);
    Matrix sums(k, d);

    for (std::size_t it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = points.row(i);
            int best = run.labels[i];
            double best_d = best >= 0 ? squared_distance(p, centroids.row(static_cast<std::size_t>(best)))
                                      : std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double dc = squared_distance(p, centroids.row(c));
                if (dc < best_d || best < 0) {
                    best_d = dc;
                    best = static_cast<int>(c);
                }
            }
            if (best != run.labels[i]) {
                run.labels[i] = best;
                changed = true;
            }
        }

        std::fill(sizes.begin(), sizes.end(), 0);
        for (int l : run.labels) ++sizes[static_cast<std::size_t>(l)];
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] != 0) continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto li = static_cast<std::size_t>(run.labels[i]);
                if (sizes[li] < 2) continue;
                const double di = squared_distance(points.row(i), centroids.row(li));
                if (di > far_d) {
                    far_d = di;
                    far = i;
                }
            }
            if (far == n) break; // n < k: nothing left to move
            --sizes[static_cast<std::size_t>(run.labels[far])];
            run.labels[far] = static_cast<int>(c);
            sizes[c] = 1;
            changed = true;
        }

        std::fill(sums.values().begin(), sums.values().end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto s = sums.row(static_cast<std::size_t>(run.labels[i]));
            const auto p = points.row(i);
            for (std::size_t j = 0; j < d; ++j) s[j] += p[j];
        }
        double max_move = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] == 0) continue;
            auto cen = centroids.row(c);
            const auto s = sums.row(c);
            double move = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double v = s[j] / static_cast<double>(sizes[c]);
                move += (v - cen[j]) * (v - cen[j]);
                cen[j] = v;
            }
            max_move = std::max(max_move, std::sqrt(move));
        }

        run.wcss_history.push_back(within_cluster_ss(points, run.labels, centroids));
        run.iterations = it + 1;
        if (!changed || max_move < tol) {
            run.converged = true;
            break;
        }
    }
    run.centroids = std::move(centroids);
    return run;
}

struct KMeansConfig {
    std::size_t k = 2;
    std::uint64_t seed = 0;
    std::size_t max_iter = 300;
    double tol = 1e-8;
};

/// Seeded k-means: distance-weighted initialization followed by Lloyd iterations.
inline ClusteringResult kmeans(const Matrix& points, const KMeansConfig& cfg) {
    if (cfg.k < 1) throw ConfigError("kmeans: k must be at least 1");
    if (cfg.k > points.rows())
        throw DataError("kmeans: k = " + std::to_string(cfg.k) + " exceeds n = " + std::to_string(points.rows()));
    Stopwatch clock;
    Rng rng(cfg.seed);
    auto run = lloyd(points, kmeans_plusplus_init(points, cfg.k, rng), cfg.max_iter, cfg.tol);
    ClusteringResult r;
    r.labels = std::move(run.labels);
    r.representatives = std::move(run.centroids);
    r.k = cfg.k;
    r.algorithm = Algorithm::KMeans;
    r.elapsed_seconds = clock.seconds();
    return r;
}

} // namespace cmlp
