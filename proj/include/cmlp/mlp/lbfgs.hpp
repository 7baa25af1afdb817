#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cmlp/core/error.hpp"

namespace cmlp {

struct LbfgsOptions {
    /// Number of (s, y) curvature pairs kept.
    std::size_t memory = 10;
    std::size_t max_iter = 1000;
    /// Stop once the largest gradient component drops below this.
    double grad_tol = 1e-6;
    /// Sufficient-decrease constant.
    double c1 = 1e-4;
    /// Curvature constant, c1 < c2 < 1.
    double c2 = 0.9;
    std::size_t max_linesearch = 40;

    void validate() const {
        if (memory < 1) throw ConfigError("lbfgs: memory must be positive");
        if (max_iter < 1) throw ConfigError("lbfgs: max_iter must be positive");
        if (!(grad_tol > 0.0)) throw ConfigError("lbfgs: grad_tol must be positive");
        if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) throw ConfigError("lbfgs: need 0 < c1 < c2 < 1");
        if (max_linesearch < 1) throw ConfigError("lbfgs: max_linesearch must be positive");
    }
};

struct LbfgsResult {
    std::vector<double> x;
    double value = 0.0;
    double grad_inf_norm = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
    /// Objective at the start point and after every accepted step.
    std::vector<double> value_history;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double inf_norm(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

/// Minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb),
/// kept inside the middle 80% of the interval; bisection when the cubic has
/// no usable minimizer.
inline double cubic_step(double a, double fa, double ga, double b, double fb, double gb) {
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double margin = 0.1 * (hi - lo);
    const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - ga * gb;
    double t = 0.5 * (a + b);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b - a);
        const double denom = gb - ga + 2.0 * d2;
        if (denom != 0.0) {
            const double cand = b - (b - a) * (gb + d2 - d1) / denom;
            if (std::isfinite(cand)) t = cand;
        }
    }
    return std::clamp(t, lo + margin, hi - margin);
}

/// Unclamped minimizer of the same cubic; NaN when it has none.
inline double cubic_minimizer(double a, double fa, double ga, double b, double fb, double gb) {
    const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - ga * gb;
    if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = gb - ga + 2.0 * d2;
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return b - (b - a) * (gb + d2 - d1) / denom;
}

inline constexpr double kRefineRatio = 1e-2;
inline constexpr double kValueNoise = 1e-12;

} // namespace detail

/// Limited-memory BFGS with a strong-Wolfe line search (bracketing then
/// zoom with safeguarded cubic interpolation).
///
/// `objective(x, grad)` returns f(x) and writes the gradient into `grad`.
/// The inverse-Hessian seed for the two-loop recursion is scaled by
/// s'y / y'y of the newest pair; pairs with s'y <= 1e-10 |s| |y| are
/// discarded. Non-finite values raise NumericalError naming the iteration.
template <class Objective>
LbfgsResult lbfgs_minimize(Objective&& objective, std::vector<double> x0, const LbfgsOptions& opt) {
    opt.validate();
    using detail::dot;
    const std::size_t n = x0.size();

    LbfgsResult res;
    std::vector<double> x = std::move(x0);
    std::vector<double> g(n);
    std::size_t iteration = 0;

    auto evaluate = [&](std::span<const double> at, std::span<double> grad) {
        const double v = objective(at, grad);
        ++res.evaluations;
        if (!std::isfinite(v) || !detail::all_finite(grad))
            throw NumericalError("lbfgs: non-finite objective or gradient at iteration " + std::to_string(iteration));
        return v;
    };

    double f = evaluate(x, g);
    res.value_history.push_back(f);

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::vector<double> d(n), alpha_buf, x_trial(n), g_trial(n), x_lo(n), g_lo(n);

    while (detail::inf_norm(g) >= opt.grad_tol && iteration < opt.max_iter) {
        // Two-loop recursion: d = -H g.
        for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
        const std::size_t m = s_hist.size();
        alpha_buf.assign(m, 0.0);
        for (std::size_t j = m; j-- > 0;) {
            alpha_buf[j] = rho_hist[j] * dot(s_hist[j], d);
            for (std::size_t i = 0; i < n; ++i) d[i] -= alpha_buf[j] * y_hist[j][i];
        }
        if (m > 0) {
            const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
            for (double& v : d) v *= gamma;
        }
        for (std::size_t j = 0; j < m; ++j) {
            const double beta = rho_hist[j] * dot(y_hist[j], d);
            for (std::size_t i = 0; i < n; ++i) d[i] += (alpha_buf[j] - beta) * s_hist[j][i];
        }

        double dphi0 = dot(g, d);
        if (!(dphi0 < 0.0)) {
            // Not a descent direction: drop the memory and use steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            dphi0 = dot(g, d);
        }
        const double phi0 = f;
        double step = s_hist.empty() ? std::min(1.0, 1.0 / std::sqrt(dot(d, d))) : 1.0;

        auto eval_at = [&](double a) {
            for (std::size_t i = 0; i < n; ++i) x_trial[i] = x[i] + a * d[i];
            const double v = evaluate(x_trial, g_trial);
            return std::pair{v, dot(g_trial, d)};
        };
        auto armijo = [&](double a, double phi) { return phi <= phi0 + opt.c1 * a * dphi0; };
        auto curvature = [&](double dphi) { return std::abs(dphi) <= -opt.c2 * dphi0; };
        // Approximate Wolfe test for when value changes are lost in rounding.
        const double f_noise = detail::kValueNoise * std::max(1.0, std::abs(phi0));
        auto approx_wolfe = [&](double phi, double dphi) {
            return phi <= phi0 + f_noise && dphi <= (2.0 * opt.c1 - 1.0) * dphi0 && curvature(dphi);
        };

        // Lower end of the bracket always satisfies sufficient decrease;
        // x_lo/g_lo hold its point once it moves off zero.
        double a_lo = 0.0, f_lo = phi0, dphi_lo = dphi0;
        double a_hi = 0.0, f_hi = 0.0, dphi_hi = 0.0;
        bool bracketed = false;
        bool accepted = false;
        std::size_t evals = 0;
        auto promote_lo = [&](double a, double phi, double dphi) {
            a_lo = a;
            f_lo = phi;
            dphi_lo = dphi;
            x_lo = x_trial;
            g_lo = g_trial;
        };

        while (evals < opt.max_linesearch) {
            if (bracketed) step = detail::cubic_step(a_lo, f_lo, dphi_lo, a_hi, f_hi, dphi_hi);
            const auto [phi, dphi] = eval_at(step);
            ++evals;
            if (approx_wolfe(phi, dphi)) {
                promote_lo(step, phi, dphi);
                accepted = true;
                break;
            }
            if (!armijo(step, phi) || phi >= f_lo) {
                a_hi = step;
                f_hi = phi;
                dphi_hi = dphi;
                bracketed = true;
                continue;
            }
            if (curvature(dphi)) {
                promote_lo(step, phi, dphi);
                accepted = true;
                break;
            }
            if (bracketed) {
                if (dphi * (a_hi - a_lo) >= 0.0) {
                    a_hi = a_lo;
                    f_hi = f_lo;
                    dphi_hi = dphi_lo;
                }
                promote_lo(step, phi, dphi);
            } else if (dphi >= 0.0) {
                a_hi = a_lo;
                f_hi = f_lo;
                dphi_hi = dphi_lo;
                promote_lo(step, phi, dphi);
                bracketed = true;
            } else {
                promote_lo(step, phi, dphi);
                step = std::min(4.0 * step, 1e10);
            }
            if (bracketed && std::abs(a_hi - a_lo) <= 1e-16 * std::max(1.0, a_lo)) break;
        }

        // Without a strong-Wolfe point, fall back to the best sufficient-decrease point found.
        if (!accepted && a_lo == 0.0) break;

        // One interpolation from the two ends of the accepted step; kept only
        // when it is itself a strong-Wolfe point with a lower value.
        if (accepted && std::abs(dphi_lo) > detail::kRefineRatio * -dphi0 && evals < opt.max_linesearch) {
            const double t = detail::cubic_minimizer(0.0, phi0, dphi0, a_lo, f_lo, dphi_lo);
            if (t > 0.0 && t <= 10.0 * a_lo && t != a_lo) {
                const auto [phi, dphi] = eval_at(t);
                const bool better = phi < f_lo && armijo(t, phi) && curvature(dphi);
                if (better || (approx_wolfe(phi, dphi) && std::abs(dphi) < std::abs(dphi_lo)))
                    promote_lo(t, phi, dphi);
            }
        }

        ++iteration;
        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = x_lo[i] - x[i];
            y[i] = g_lo[i] - g[i];
        }
        const double sy = dot(s, y);
        if (sy > 1e-10 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y))) {
            if (s_hist.size() == opt.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
        }
        x = x_lo;
        g = g_lo;
        f = f_lo;
        res.value_history.push_back(f);
    }

    res.grad_inf_norm = detail::inf_norm(g);
    res.converged = res.grad_inf_norm < opt.grad_tol;
    res.iterations = iteration;
    res.value = f;
    res.x = std::move(x);
    return res;
}

} // namespace cmlp
