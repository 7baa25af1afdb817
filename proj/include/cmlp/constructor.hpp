#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cmlp/clustering.hpp"
#include "cmlp/core/stopwatch.hpp"
#include "cmlp/dataset.hpp"
#include "cmlp/metrics.hpp"
#include "cmlp/mlp.hpp"

namespace cmlp {

using ClusteringConfig = std::variant<XMeansConfig, DbscanConfig, MeanShiftConfig>;

inline Algorithm algorithm_of(const ClusteringConfig& c) {
    switch (c.index()) {
    case 0: return Algorithm::XMeans;
    case 1: return Algorithm::DBSCAN;
    default: return Algorithm::MeanShift;
    }
}

inline ClusteringResult run_clustering(const Matrix& points, const ClusteringConfig& cfg) {
    return std::visit(
        [&](const auto& c) -> ClusteringResult {
            using C = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<C, XMeansConfig>) return xmeans(points, c);
            else if constexpr (std::is_same_v<C, DbscanConfig>) return dbscan(points, c);
            else return meanshift(points, c);
        },
        cfg);
}

struct PipelineConfig {
    ClusteringConfig clustering = XMeansConfig{};
    SplitSpec split;
    TrainConfig train;
    CleaningPolicy cleaning;
    /// Fraction of the training split on the fitting side of the validation cut.
    double validation_fit_fraction = 0.8;
    double outlier_threshold = 0.15;

    Algorithm algorithm() const { return algorithm_of(clustering); }

    void validate() const {
        std::visit([](const auto& c) { c.validate(); }, clustering);
        split.validate();
        train.validate();
        cleaning.validate();
        if (!(validation_fit_fraction > 0.0 && validation_fit_fraction < 1.0))
            throw ConfigError("validation_fit_fraction must lie in (0, 1)");
        if (!(outlier_threshold > 0.0)) throw ConfigError("outlier_threshold must be positive");
    }
};

struct PipelineReport {
    std::size_t k = 0;
    NetworkSpec spec;
    double clustering_seconds = 0.0;
    double training_seconds = 0.0;
    double total_seconds = 0.0;
    MetricBlock metrics_train;
    MetricBlock metrics_test;
    std::optional<MetricBlock> metrics_validation;
    std::size_t rows_loaded = 0;
    std::size_t rows_clean = 0;
    /// Target standard deviation on the training split; rms / target_scale
    /// expresses errors in normalized target units.
    double target_scale = 1.0;
    TrainReport train_report;
};

/// Everything a pipeline run produces, for callers that need more than the report.
struct PipelineRun {
    PipelineReport report;
    ClusteringResult clustering;
    MlpModel model;
    Split split;
    std::vector<double> train_predictions;
    std::vector<double> test_predictions;
};

namespace detail {

/// Runs `fn`, prefixing any library error with the pipeline stage it came from.
template <class Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(stage) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(stage) + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(stage) + ": " + e.what());
    }
}

} // namespace detail

struct Architecture {
    NetworkSpec spec;
    ClusteringResult clustering;
};

/// Clusters the (normalized) training features and sizes the hidden layer
/// with the resulting cluster count. Targets never enter the clustering.
inline Architecture construct_architecture(const Dataset& train, const ClusteringConfig& cfg) {
    Architecture a;
    a.clustering = run_clustering(train.features, cfg);
    a.spec.input_width = train.dims();
    a.spec.hidden_width = cluster_count(a.clustering);
    return a;
}

/// Cleaning, holdout split, normalization fitted on the training split,
/// clustering-driven architecture, training, and evaluation on the train,
/// validation-cut and test rows.
///
/// The model is trained on the whole training split; the validation block
/// scores the held-back side of a seeded cut of that split and is reported
/// only.
inline PipelineRun run_pipeline_full(const Dataset& ds, const PipelineConfig& cfg) {
    cfg.validate();
    Stopwatch total;
    PipelineRun run;
    PipelineReport& rep = run.report;
    rep.rows_loaded = ds.size();

    const Dataset clean = detail::in_stage("cleaning", [&] {
        return clean_sentinels(filter_labeled(ds, cfg.cleaning), cfg.cleaning);
    });
    rep.rows_clean = clean.size();

    run.split = detail::in_stage("split", [&] { return holdout_split(clean, cfg.split); });
    const Dataset& train_raw = run.split.train;

    const NormalizationParams norm = detail::in_stage("normalization", [&] { return fit_normalization(train_raw); });
    const Dataset train_norm = apply_normalization(train_raw, norm);
    rep.target_scale = norm.target_scale;

    Architecture arch = detail::in_stage("clustering", [&] { return construct_architecture(train_norm, cfg.clustering); });
    rep.clustering_seconds = arch.clustering.elapsed_seconds;
    rep.k = arch.spec.hidden_width;
    rep.spec = arch.spec;
    run.clustering = std::move(arch.clustering);

    TrainedModel trained = detail::in_stage("training", [&] { return train(rep.spec, train_raw, cfg.train); });
    rep.training_seconds = trained.report.elapsed_seconds;
    rep.train_report = trained.report;
    run.model = std::move(trained.model);

    detail::in_stage("evaluation", [&] {
        run.train_predictions = predict(run.model, train_raw);
        run.test_predictions = predict(run.model, run.split.test);
        rep.metrics_train = evaluate(run.train_predictions, train_raw.targets, cfg.outlier_threshold);
        rep.metrics_test = evaluate(run.test_predictions, run.split.test.targets, cfg.outlier_threshold);
        if (train_raw.size() >= 2) {
            const SplitSpec cut{cfg.validation_fit_fraction, derive_seed(cfg.split.seed, 1)};
            const auto held = holdout_indices(train_raw.size(), cut).second;
            std::vector<double> pred, actual;
            for (std::size_t i : held) {
                pred.push_back(run.train_predictions[i]);
                actual.push_back(train_raw.targets[i]);
            }
            rep.metrics_validation = evaluate(pred, actual, cfg.outlier_threshold);
        }
        return 0;
    });
    rep.total_seconds = total.seconds();
    return run;
}

inline PipelineReport run_pipeline(const Dataset& ds, const PipelineConfig& cfg) {
    return run_pipeline_full(ds, cfg).report;
}

// ---------------------------------------------------------------------------
// Ad-hoc baseline: one network per candidate width.

struct SweepEntry {
    std::size_t hidden_width = 0;
    double rms_train = 0.0;
    double rms_test = 0.0;
    std::optional<double> correlation;
    double training_seconds = 0.0;
};

struct SweepReport {
    /// Ascending by width, one entry per distinct width.
    std::vector<SweepEntry> entries;
    std::size_t best_hidden_width = 0;
    double target_scale = 1.0;
};

/// Trains one network per width on the same split and seed. The best width
/// has the lowest test RMS; ties go to the smaller width.
inline SweepReport sweep_hidden(const Dataset& ds, std::vector<std::size_t> widths, const SplitSpec& split,
                                const TrainConfig& train_cfg) {
    if (widths.empty()) throw ConfigError("sweep: widths must be non-empty");
    if (std::find(widths.begin(), widths.end(), std::size_t{0}) != widths.end())
        throw ConfigError("sweep: widths must be positive");
    std::sort(widths.begin(), widths.end());
    widths.erase(std::unique(widths.begin(), widths.end()), widths.end());

    const Split sp = holdout_split(ds, split);
    SweepReport rep;
    rep.target_scale = fit_normalization(sp.train).target_scale;
    for (std::size_t w : widths) {
        const NetworkSpec spec{ds.dims(), w};
        const TrainedModel tm = train(spec, sp.train, train_cfg);
        const auto pred_test = predict(tm.model, sp.test);
        const auto pred_train = predict(tm.model, sp.train);
        SweepEntry e;
        e.hidden_width = w;
        e.rms_train = rms(pred_train, sp.train.targets);
        e.rms_test = rms(pred_test, sp.test.targets);
        if (pred_test.size() >= 2) e.correlation = detail::pearson(pred_test, sp.test.targets);
        e.training_seconds = tm.report.elapsed_seconds;
        rep.entries.push_back(e);
    }
    const auto best = std::min_element(rep.entries.begin(), rep.entries.end(),
                                       [](const SweepEntry& a, const SweepEntry& b) { return a.rms_test < b.rms_test; });
    rep.best_hidden_width = best->hidden_width;
    return rep;
}

// ---------------------------------------------------------------------------
// Sensitivity of X-means to the lower bound of its search space.

struct StabilityRow {
    std::size_t kmin = 0;
    std::size_t k = 0;
    double clustering_seconds = 0.0;
    double training_seconds = 0.0;
    double rms_test = 0.0;
};

/// One pipeline run per kmin with the split, seeds and remaining settings shared.
inline std::vector<StabilityRow> kmin_stability(const Dataset& ds, const std::vector<std::size_t>& kmins,
                                                const PipelineConfig& cfg) {
    if (cfg.algorithm() != Algorithm::XMeans) throw ConfigError("stability: clustering algorithm must be xmeans");
    if (kmins.empty()) throw ConfigError("stability: kmins must be non-empty");
    const auto& base = std::get<XMeansConfig>(cfg.clustering);
    for (std::size_t kmin : kmins) {
        if (kmin < 1) throw ConfigError("stability: kmins must be positive");
        if (base.kmax != 0 && base.kmax < kmin)
            throw ConfigError("stability: kmin " + std::to_string(kmin) + " exceeds kmax " + std::to_string(base.kmax));
    }

    std::vector<StabilityRow> rows;
    for (std::size_t kmin : kmins) {
        PipelineConfig c = cfg;
        std::get<XMeansConfig>(c.clustering).kmin = kmin;
        const PipelineReport r = run_pipeline(ds, c);
        rows.push_back({kmin, r.k, r.clustering_seconds, r.training_seconds, r.metrics_test.rms});
    }
    return rows;
}

} // namespace cmlp
