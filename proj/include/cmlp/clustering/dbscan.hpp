#pragma once

#include <deque>
#include <vector>

#include "cmlp/clustering/result.hpp"
#include "cmlp/core/error.hpp"
#include "cmlp/core/stopwatch.hpp"

namespace cmlp {

struct DbscanConfig {
    double eps = 0.5;
    std::size_t min_pts = 5;

    void validate() const {
        if (!(eps > 0.0)) throw ConfigError("dbscan: eps must be positive");
        if (min_pts < 1) throw ConfigError("dbscan: min_pts must be at least 1");
    }
};

/// Density-based clustering with brute-force neighborhoods.
///
/// A point is core when at least min_pts points (itself included) lie within
/// eps. Points are visited in input order; each unvisited core point starts
/// a cluster that is expanded breadth-first before the next one begins, so a
/// border point reachable from several clusters joins the first to reach it.
/// Unreached points keep the noise label.
inline ClusteringResult dbscan(const Matrix& points, const DbscanConfig& cfg) {
    cfg.validate();
    Stopwatch clock;
    const std::size_t n = points.rows();
    const double eps2 = cfg.eps * cfg.eps;

    auto neighbors = [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < n; ++j)
            if (squared_distance(points.row(i), points.row(j)) <= eps2) out.push_back(j);
        return out;
    };

    constexpr int kUnvisited = -2;
    std::vector<int> labels(n, kUnvisited);
    int next_cluster = 0;
    std::deque<std::size_t> frontier;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != kUnvisited) continue;
        const auto seed_nb = neighbors(i);
        if (seed_nb.size() < cfg.min_pts) {
            labels[i] = kNoise;
            continue;
        }
        const int cluster = next_cluster++;
        labels[i] = cluster;
        frontier.assign(seed_nb.begin(), seed_nb.end());
        while (!frontier.empty()) {
            const std::size_t q = frontier.front();
            frontier.pop_front();
            if (labels[q] == kNoise) labels[q] = cluster; // border point
            if (labels[q] != kUnvisited) continue;
            labels[q] = cluster;
            const auto nb = neighbors(q);
            if (nb.size() >= cfg.min_pts) frontier.insert(frontier.end(), nb.begin(), nb.end());
        }
    }

    ClusteringResult r;
    r.k = static_cast<std::size_t>(next_cluster);
    r.labels = std::move(labels);
    r.representatives = Matrix(r.k, points.cols());
    std::vector<std::size_t> counts(r.k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (r.labels[i] < 0) continue;
        const auto c = static_cast<std::size_t>(r.labels[i]);
        ++counts[c];
        auto rep = r.representatives.row(c);
        const auto p = points.row(i);
        for (std::size_t j = 0; j < p.size(); ++j) rep[j] += p[j];
    }
    for (std::size_t c = 0; c < r.k; ++c)
        for (double& v : r.representatives.row(c)) v /= static_cast<double>(counts[c]);
    r.algorithm = Algorithm::DBSCAN;
    r.elapsed_seconds = clock.seconds();
    return r;
}

} // namespace cmlp
