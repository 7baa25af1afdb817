#pragma once

#include <vector>

#include "cmlp/core/random.hpp"
#include "cmlp/core/stopwatch.hpp"
#include "cmlp/dataset.hpp"
#include "cmlp/mlp/lbfgs.hpp"
#include "cmlp/mlp/model.hpp"

namespace cmlp {

struct TrainConfig {
    std::size_t lbfgs_memory = 10;
    std::size_t max_iter = 1000;
    double grad_tol = 1e-6;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    std::uint64_t init_scale_seed = 0;
    std::size_t restarts = 1;

    LbfgsOptions lbfgs_options() const {
        LbfgsOptions o;
        o.memory = lbfgs_memory;
        o.max_iter = max_iter;
        o.grad_tol = grad_tol;
        o.c1 = wolfe_c1;
        o.c2 = wolfe_c2;
        return o;
    }

    void validate() const {
        lbfgs_options().validate();
        if (restarts < 1) throw ConfigError("training: restarts must be positive");
    }
};

struct TrainReport {
    double final_loss = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double elapsed_seconds = 0.0;
    /// Restart whose model was kept.
    std::size_t best_restart = 0;
    /// Loss of the kept restart at its initial weights.
    double initial_loss = 0.0;
};

struct TrainedModel {
    MlpModel model;
    TrainReport report;
};

/// Seed of the weight initialization for one restart.
inline std::uint64_t restart_seed(std::uint64_t seed, std::size_t restart) {
    return restart == 0 ? seed : derive_seed(seed, restart);
}

/// Fits a d:k:1 network on `train_set` given in raw units.
///
/// Feature and target z-score parameters are fitted on `train_set` and
/// stored in the model. Each restart draws its own initialization and runs
/// L-BFGS on the full-batch half-MSE; the lowest final loss wins, ties going
/// to the earlier restart.
inline TrainedModel train(const NetworkSpec& spec, const Dataset& train_set, const TrainConfig& cfg) {
    cfg.validate();
    spec.validate();
    if (train_set.dims() != spec.input_width)
        throw DataError("training: dataset has " + std::to_string(train_set.dims()) + " features, network " +
                        spec.to_string());
    Stopwatch clock;
    const NormalizationParams norm = fit_normalization(train_set);
    const Dataset normalized = apply_normalization(train_set, norm);

    auto objective = [&](std::span<const double> params, std::span<double> grad) {
        return loss_and_gradient(spec, params, normalized.features, normalized.targets, grad);
    };

    TrainedModel best;
    bool have_best = false;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        MlpModel m = init_model(spec, restart_seed(cfg.init_scale_seed, r));
        const LbfgsResult res = lbfgs_minimize(objective, m.flatten(), cfg.lbfgs_options());
        if (have_best && !(res.value < best.report.final_loss)) continue;
        m.unflatten(res.x);
        m.norm = norm;
        best.model = std::move(m);
        best.report.final_loss = res.value;
        best.report.iterations = res.iterations;
        best.report.converged = res.converged;
        best.report.best_restart = r;
        best.report.initial_loss = res.value_history.front();
        have_best = true;
    }
    best.report.elapsed_seconds = clock.seconds();
    return best;
}

/// Predictions in target units for raw (unnormalized) rows of `ds`.
inline std::vector<double> predict(const MlpModel& m, const Dataset& ds) {
    if (ds.dims() != m.spec.input_width)
        throw DataError("predict: dataset has " + std::to_string(ds.dims()) + " features, model expects " +
                        std::to_string(m.spec.input_width));
    check_width(m.norm, ds.dims());
    const auto params = m.flatten();
    const detail::ParamView view(m.spec, params);
    std::vector<double> hidden(m.spec.hidden_width);
    std::vector<double> x(ds.dims());
    std::vector<double> out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto raw = ds.features.row(i);
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = (raw[j] - m.norm.center[j]) / m.norm.scale[j];
        out[i] = m.norm.denormalize_target(detail::forward_into(m.spec, view, x, hidden.data()));
    }
    return out;
}

} // namespace cmlp
