#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cmlp/clustering/bic.hpp"
#include "cmlp/clustering/kmeans.hpp"
#include "cmlp/clustering/result.hpp"
#include "cmlp/core/random.hpp"
#include "cmlp/core/stopwatch.hpp"

namespace cmlp {

struct XMeansConfig {
    std::size_t kmin = 2;
    /// 0 selects min(n / 2, 200), raised to kmin if smaller.
    std::size_t kmax = 0;
    std::size_t max_split_rounds = 50;
    std::size_t kmeans_max_iter = 300;
    double kmeans_tol = 1e-8;
    /// Seeded split directions tried per cluster; the best children are kept.
    std::size_t split_attempts = 3;
    std::uint64_t seed = 0;

    std::size_t effective_kmax(std::size_t n) const {
        if (kmax != 0) return kmax;
        return std::max(kmin, std::min<std::size_t>(n / 2, 200));
    }

    void validate() const {
        if (kmin < 1) throw ConfigError("xmeans: kmin must be at least 1");
        if (kmax != 0 && kmax < kmin) throw ConfigError("xmeans: kmin must not exceed kmax");
        if (max_split_rounds < 1) throw ConfigError("xmeans: max_split_rounds must be positive");
        if (kmeans_max_iter < 1) throw ConfigError("xmeans: kmeans_max_iter must be positive");
        if (!(kmeans_tol > 0.0)) throw ConfigError("xmeans: kmeans_tol must be positive");
        if (split_attempts < 1) throw ConfigError("xmeans: split_attempts must be positive");
    }
};

/// One split decision, kept for inspection and tests.
struct SplitDecision {
    std::size_t round = 0;
    std::size_t members = 0;
    double parent_bic = 0.0;
    double children_bic = 0.0;
    bool accepted = false;
};

struct XMeansTrace {
    ClusteringResult result;
    std::vector<SplitDecision> decisions;
    std::size_t rounds = 0;
};

/// X-means with the full decision trace.
///
/// Starts from kmin-means. Each round tries to split every current cluster:
/// 2-means runs on the cluster's members with children seeded at
/// centroid ± r·u (u a seeded random unit direction, r the cluster's RMS
/// radius), repeated for split_attempts directions keeping the highest
/// children BIC, and the split is accepted only when the children's BIC strictly
/// exceeds the parent's. Accepted splits are followed by a global Lloyd pass
/// from the enlarged centroid set. Stops at kmax, after a round without
/// accepted splits, or after max_split_rounds.
inline XMeansTrace xmeans_trace(const Matrix& points, const XMeansConfig& cfg) {
    cfg.validate();
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    if (cfg.kmin > n)
        throw DataError("xmeans: kmin = " + std::to_string(cfg.kmin) + " exceeds n = " + std::to_string(n));
    const std::size_t kmax = cfg.effective_kmax(n);

    Stopwatch clock;
    Rng rng(cfg.seed);
    LloydRun state = lloyd(points, kmeans_plusplus_init(points, cfg.kmin, rng), cfg.kmeans_max_iter, cfg.kmeans_tol);

    XMeansTrace trace;
    std::vector<std::size_t> members;
    std::vector<double> dir(d);
    for (std::size_t round = 0; round < cfg.max_split_rounds; ++round) {
        const std::size_t k = state.centroids.rows();
        if (k >= kmax) break;
        trace.rounds = round + 1;

        std::vector<double> next; // flattened centroids after this round
        std::size_t next_k = 0;
        bool accepted_any = false;
        bool at_limit = false;
        for (std::size_t c = 0; c < k; ++c) {
            const auto parent = state.centroids.row(c);
            auto keep_parent = [&] {
                next.insert(next.end(), parent.begin(), parent.end());
                ++next_k;
            };
            // Splitting adds one cluster beyond those still pending.
            if (at_limit || next_k + (k - c) + 1 > kmax) {
                at_limit = true;
                keep_parent();
                continue;
            }

            members.clear();
            for (std::size_t i = 0; i < n; ++i)
                if (state.labels[i] == static_cast<int>(c)) members.push_back(i);
            if (members.size() < 3) {
                keep_parent();
                continue;
            }
            const Matrix sub = points.select_rows(members);

            double ss = 0.0;
            for (std::size_t i = 0; i < sub.rows(); ++i) ss += squared_distance(sub.row(i), parent);
            const double radius = std::sqrt(ss / static_cast<double>(sub.rows()));
            if (!(radius > 0.0)) {
                keep_parent();
                continue;
            }

            LloydRun children;
            double children_bic = -std::numeric_limits<double>::infinity();
            for (std::size_t attempt = 0; attempt < cfg.split_attempts; ++attempt) {
                rng.unit_vector(dir);
                Matrix seeds(2, d);
                for (std::size_t j = 0; j < d; ++j) {
                    seeds(0, j) = parent[j] + radius * dir[j];
                    seeds(1, j) = parent[j] - radius * dir[j];
                }
                LloydRun run = lloyd(sub, std::move(seeds), cfg.kmeans_max_iter, cfg.kmeans_tol);
                const double b = bic_score(sub, run.labels, run.centroids);
                if (b > children_bic) {
                    children_bic = b;
                    children = std::move(run);
                }
            }

            Matrix parent_centroid(1, d);
            std::copy(parent.begin(), parent.end(), parent_centroid.row(0).begin());
            const std::vector<int> single(sub.rows(), 0);
            SplitDecision dec;
            dec.round = round;
            dec.members = sub.rows();
            dec.parent_bic = bic_score(sub, single, parent_centroid);
            dec.children_bic = children_bic;
            dec.accepted = dec.children_bic > dec.parent_bic;
            trace.decisions.push_back(dec);

            if (dec.accepted) {
                accepted_any = true;
                for (std::size_t q = 0; q < 2; ++q) {
                    const auto ch = children.centroids.row(q);
                    next.insert(next.end(), ch.begin(), ch.end());
                }
                next_k += 2;
            } else {
                keep_parent();
            }
        }
        if (!accepted_any) break;
        state = lloyd(points, Matrix(next_k, d, std::move(next)), cfg.kmeans_max_iter, cfg.kmeans_tol);
    }

    ClusteringResult& r = trace.result;
    r.k = state.centroids.rows();
    r.labels = std::move(state.labels);
    r.representatives = std::move(state.centroids);
    r.algorithm = Algorithm::XMeans;
    r.elapsed_seconds = clock.seconds();
    return trace;
}

inline ClusteringResult xmeans(const Matrix& points, const XMeansConfig& cfg) {
    return xmeans_trace(points, cfg).result;
}

} // namespace cmlp
