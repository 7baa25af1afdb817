#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cmlp/core/error.hpp"
#include "cmlp/core/matrix.hpp"
#include "cmlp/core/random.hpp"
#include "cmlp/dataset.hpp"

namespace cmlp {

/// Layer widths d:k:1 of a single-hidden-layer regressor.
struct NetworkSpec {
    std::size_t input_width = 1;
    std::size_t hidden_width = 1;
    static constexpr std::size_t output_width = 1;

    std::size_t parameter_count() const { return hidden_width * input_width + 2 * hidden_width + 1; }

    std::string to_string() const {
        return std::to_string(input_width) + ":" + std::to_string(hidden_width) + ":" + std::to_string(output_width);
    }

    void validate() const {
        if (input_width < 1 || hidden_width < 1) throw ConfigError("network widths must be positive");
    }

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Weights of a d:k:1 perceptron with tanh hidden units and a linear output,
/// plus the normalization the weights were fitted under.
struct MlpModel {
    NetworkSpec spec;
    std::vector<double> w1; ///< k×d, row-major (one row per hidden unit)
    std::vector<double> b1; ///< k
    std::vector<double> w2; ///< k
    double b2 = 0.0;
    NormalizationParams norm;

    /// Canonical flattening: w1 row-major, b1, w2, b2.
    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(spec.parameter_count());
        out.insert(out.end(), w1.begin(), w1.end());
        out.insert(out.end(), b1.begin(), b1.end());
        out.insert(out.end(), w2.begin(), w2.end());
        out.push_back(b2);
        return out;
    }

    void unflatten(std::span<const double> params) {
        if (params.size() != spec.parameter_count())
            throw DataError("parameter vector has " + std::to_string(params.size()) + " entries, expected " +
                            std::to_string(spec.parameter_count()));
        const std::size_t k = spec.hidden_width;
        const std::size_t d = spec.input_width;
        auto it = params.begin();
        w1.assign(it, it + static_cast<std::ptrdiff_t>(k * d));
        it += static_cast<std::ptrdiff_t>(k * d);
        b1.assign(it, it + static_cast<std::ptrdiff_t>(k));
        it += static_cast<std::ptrdiff_t>(k);
        w2.assign(it, it + static_cast<std::ptrdiff_t>(k));
        it += static_cast<std::ptrdiff_t>(k);
        b2 = *it;
    }

    friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

/// Uniform weights in ±sqrt(6 / (fan_in + fan_out)) per layer, zero biases.
/// Normalization is the identity until training replaces it.
inline MlpModel init_model(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t d = spec.input_width;
    const std::size_t k = spec.hidden_width;
    Rng rng(seed);
    MlpModel m;
    m.spec = spec;
    const double lim1 = std::sqrt(6.0 / static_cast<double>(d + k));
    const double lim2 = std::sqrt(6.0 / static_cast<double>(k + 1));
    m.w1.resize(k * d);
    for (double& w : m.w1) w = rng.uniform(-lim1, lim1);
    m.b1.assign(k, 0.0);
    m.w2.resize(k);
    for (double& w : m.w2) w = rng.uniform(-lim2, lim2);
    m.b2 = 0.0;
    m.norm = NormalizationParams::identity(d);
    return m;
}

namespace detail {

/// Read-only view of a flat parameter vector in canonical order.
struct ParamView {
    const double* w1;
    const double* b1;
    const double* w2;
    double b2;

    ParamView(const NetworkSpec& s, std::span<const double> p)
        : w1(p.data()),
          b1(w1 + s.hidden_width * s.input_width),
          w2(b1 + s.hidden_width),
          b2(w2[s.hidden_width]) {}
};

inline double forward_into(const NetworkSpec& s, const ParamView& p, std::span<const double> x, double* hidden) {
    const std::size_t d = s.input_width;
    double out = p.b2;
    for (std::size_t h = 0; h < s.hidden_width; ++h) {
        const double* row = p.w1 + h * d;
        double z = p.b1[h];
        for (std::size_t j = 0; j < d; ++j) z += row[j] * x[j];
        hidden[h] = std::tanh(z);
        out += p.w2[h] * hidden[h];
    }
    return out;
}

} // namespace detail

/// Network output for one input row (no normalization applied).
inline double forward(const MlpModel& m, std::span<const double> x) {
    if (x.size() != m.spec.input_width)
        throw DataError("forward: input has " + std::to_string(x.size()) + " features, model expects " +
                        std::to_string(m.spec.input_width));
    const auto params = m.flatten();
    std::vector<double> hidden(m.spec.hidden_width);
    return detail::forward_into(m.spec, detail::ParamView(m.spec, params), x, hidden.data());
}

/// Half mean squared error (1/2n) sum (yhat - y)^2 and its gradient with
/// respect to flat parameters in canonical order. `grad` must have
/// parameter_count() entries.
inline double loss_and_gradient(const NetworkSpec& spec, std::span<const double> params, const Matrix& xs,
                                std::span<const double> ys, std::span<double> grad) {
    const std::size_t n = xs.rows();
    const std::size_t d = spec.input_width;
    const std::size_t k = spec.hidden_width;
    if (xs.cols() != d || ys.size() != n)
        throw DataError("loss: batch shape does not match network " + spec.to_string());
    if (n == 0) throw DataError("loss: empty batch");

    const detail::ParamView p(spec, params);
    std::fill(grad.begin(), grad.end(), 0.0);
    double* g_w1 = grad.data();
    double* g_b1 = g_w1 + k * d;
    double* g_w2 = g_b1 + k;
    double& g_b2 = g_w2[k];

    std::vector<double> hidden(k);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = xs.row(i);
        const double r = detail::forward_into(spec, p, x, hidden.data()) - ys[i];
        loss += r * r;
        g_b2 += r;
        for (std::size_t h = 0; h < k; ++h) {
            g_w2[h] += r * hidden[h];
            const double dz = r * p.w2[h] * (1.0 - hidden[h] * hidden[h]);
            g_b1[h] += dz;
            double* gw = g_w1 + h * d;
            for (std::size_t j = 0; j < d; ++j) gw[j] += dz * x[j];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& g : grad) g *= inv_n;
    return 0.5 * loss * inv_n;
}

inline double loss_and_gradient(const MlpModel& m, const Matrix& xs, std::span<const double> ys,
                                std::vector<double>& grad) {
    grad.resize(m.spec.parameter_count());
    return loss_and_gradient(m.spec, m.flatten(), xs, ys, grad);
}

} // namespace cmlp
