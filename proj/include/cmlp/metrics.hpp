#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "cmlp/core/error.hpp"

namespace cmlp {

// Photo-z metrics work on the normalized residual
//   delta_i = (pred_i - actual_i) / (1 + actual_i).

namespace detail {

inline void check_pair(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size())
        throw DataError("metrics: length mismatch (" + std::to_string(pred.size()) + " vs " +
                        std::to_string(actual.size()) + ")");
    if (pred.empty()) throw DataError("metrics: empty input");
}

inline double delta(double pred, double actual) {
    const double denom = 1.0 + actual;
    if (denom == 0.0) throw DataError("metrics: actual value -1 makes (1 + actual) zero");
    return (pred - actual) / denom;
}

} // namespace detail

inline double rms(std::span<const double> pred, std::span<const double> actual) {
    detail::check_pair(pred, actual);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - actual[i]) * (pred[i] - actual[i]);
    return std::sqrt(s / static_cast<double>(pred.size()));
}

inline double norm_rms(std::span<const double> pred, std::span<const double> actual) {
    detail::check_pair(pred, actual);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = detail::delta(pred[i], actual[i]);
        s += e * e;
    }
    return std::sqrt(s / static_cast<double>(pred.size()));
}

/// Mean normalized residual, outliers included.
inline double bias(std::span<const double> pred, std::span<const double> actual) {
    detail::check_pair(pred, actual);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += detail::delta(pred[i], actual[i]);
    return s / static_cast<double>(pred.size());
}

/// Fraction of points with |delta| strictly above `threshold`.
inline double outlier_fraction(std::span<const double> pred, std::span<const double> actual,
                               double threshold = 0.15) {
    detail::check_pair(pred, actual);
    std::size_t c = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) c += std::abs(detail::delta(pred[i], actual[i])) > threshold;
    return static_cast<double>(c) / static_cast<double>(pred.size());
}

namespace detail {

inline std::optional<double> pearson(std::span<const double> pred, std::span<const double> actual) {
    const std::size_t n = pred.size();
    double mp = 0.0, ma = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mp += pred[i];
        ma += actual[i];
    }
    mp /= static_cast<double>(n);
    ma /= static_cast<double>(n);
    double spp = 0.0, saa = 0.0, spa = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = pred[i] - mp;
        const double b = actual[i] - ma;
        spp += a * a;
        saa += b * b;
        spa += a * b;
    }
    if (spp == 0.0 || saa == 0.0) return std::nullopt;
    return std::clamp(spa / std::sqrt(spp * saa), -1.0, 1.0);
}

} // namespace detail

/// Pearson product-moment correlation.
inline double correlation(std::span<const double> pred, std::span<const double> actual) {
    detail::check_pair(pred, actual);
    if (pred.size() < 2) throw DataError("undefined correlation: need at least 2 points");
    const auto r = detail::pearson(pred, actual);
    if (!r) throw DataError("undefined correlation: constant input");
    return *r;
}

struct MetricBlock {
    double rms = 0.0;
    double norm_rms = 0.0;
    double bias = 0.0;
    double outlier_fraction = 0.0;
    /// Absent when either vector is constant.
    std::optional<double> correlation;
    std::size_t n = 0;
};

inline MetricBlock evaluate(std::span<const double> pred, std::span<const double> actual,
                            double outlier_threshold = 0.15) {
    MetricBlock m;
    m.rms = rms(pred, actual);
    m.norm_rms = norm_rms(pred, actual);
    m.bias = bias(pred, actual);
    m.outlier_fraction = outlier_fraction(pred, actual, outlier_threshold);
    if (pred.size() >= 2) m.correlation = detail::pearson(pred, actual);
    m.n = pred.size();
    return m;
}

} // namespace cmlp
