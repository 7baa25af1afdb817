#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "cmlp/core/error.hpp"
#include "cmlp/core/matrix.hpp"

namespace cmlp {

/// Bayesian information criterion of a hard partition under a mixture of
/// spherical Gaussians sharing one variance. Higher is better.
///
///   sigma2 = (1 / (n - k)) * sum_i |x_i - mu_label(i)|^2
///   L      = sum_c n_c ln(n_c / n) - (n d / 2) ln(2 pi sigma2) - (n - k) / 2
///   p      = (k - 1) + d k + 1
///   BIC    = L - (p / 2) ln n
///
/// A zero variance (every point on its centroid) is clamped to the smallest
/// normal double so the score stays finite.
inline double bic_score(const Matrix& points, std::span<const int> labels, const Matrix& centroids) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    const std::size_t k = centroids.rows();
    if (labels.size() != n) throw DataError("bic: label count does not match point count");
    if (n <= k) throw DataError("bic: need more points than clusters (n = " + std::to_string(n) +
                                ", k = " + std::to_string(k) + ")");

    std::vector<std::size_t> sizes(k, 0);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int l = labels[i];
        if (l < 0 || static_cast<std::size_t>(l) >= k) throw DataError("bic: label out of range");
        ++sizes[static_cast<std::size_t>(l)];
        ss += squared_distance(points.row(i), centroids.row(static_cast<std::size_t>(l)));
    }

    const double nn = static_cast<double>(n);
    const double kk = static_cast<double>(k);
    const double dd = static_cast<double>(d);
    const double sigma2 = std::max(ss / (nn - kk), std::numeric_limits<double>::min());

    double loglik = 0.0;
    for (std::size_t c = 0; c < k; ++c)
        if (sizes[c] > 0) {
            const double nc = static_cast<double>(sizes[c]);
            loglik += nc * std::log(nc / nn);
        }
    loglik -= 0.5 * nn * dd * std::log(2.0 * std::numbers::pi * sigma2);
    loglik -= 0.5 * (nn - kk);

    const double params = (kk - 1.0) + dd * kk + 1.0;
    return loglik - 0.5 * params * std::log(nn);
}

} // namespace cmlp
