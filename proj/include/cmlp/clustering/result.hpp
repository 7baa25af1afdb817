#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cmlp/core/error.hpp"
#include "cmlp/core/matrix.hpp"

namespace cmlp {

enum class Algorithm { KMeans, XMeans, DBSCAN, MeanShift };

inline constexpr std::string_view to_string(Algorithm a) noexcept {
    switch (a) {
    case Algorithm::KMeans: return "kmeans";
    case Algorithm::XMeans: return "xmeans";
    case Algorithm::DBSCAN: return "dbscan";
    case Algorithm::MeanShift: return "meanshift";
    }
    return "unknown";
}

inline constexpr int kNoise = -1;

/// Output of every clustering algorithm.
///
/// Labels are in [0, k) with every cluster non-empty; only DBSCAN may use the
/// noise label -1, and only DBSCAN may report k = 0 (every point noise, with
/// a 0×d representative matrix).
struct ClusteringResult {
    std::vector<int> labels;
    Matrix representatives;
    std::size_t k = 0;
    double elapsed_seconds = 0.0;
    Algorithm algorithm = Algorithm::KMeans;

    std::vector<std::size_t> cluster_sizes() const {
        std::vector<std::size_t> sizes(k, 0);
        for (int l : labels)
            if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
        return sizes;
    }

    std::size_t noise_count() const {
        std::size_t c = 0;
        for (int l : labels) c += (l == kNoise);
        return c;
    }
};

/// Empty string when every ClusteringResult invariant holds, otherwise the first violation.
inline std::string check_invariants(const ClusteringResult& r) {
    if (r.representatives.rows() != r.k) return "representative rows != k";
    if (r.k == 0 && r.algorithm != Algorithm::DBSCAN && !r.labels.empty()) return "k = 0";
    std::vector<std::size_t> seen(r.k, 0);
    for (int l : r.labels) {
        if (l == kNoise) {
            if (r.algorithm != Algorithm::DBSCAN) return "noise label outside DBSCAN";
            continue;
        }
        if (l < 0 || static_cast<std::size_t>(l) >= r.k) return "label out of range";
        ++seen[static_cast<std::size_t>(l)];
    }
    for (std::size_t c = 0; c < r.k; ++c)
        if (seen[c] == 0) return "cluster " + std::to_string(c) + " is empty";
    return {};
}

/// Number of clusters that size the hidden layer; the noise pseudo-cluster never counts.
inline std::size_t cluster_count(const ClusteringResult& r) {
    if (r.k == 0) throw DataError("no clusters; architecture undefined");
    return r.k;
}

} // namespace cmlp
