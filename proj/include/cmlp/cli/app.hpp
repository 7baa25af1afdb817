#pragma once

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmlp/cli/config.hpp"
#include "cmlp/cli/report.hpp"

namespace cmlp::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigFailure = 2, kDataFailure = 3, kNumericalFailure = 4 };

/// Failure to create or write an output file.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    return out;
}

inline Dataset load_input(const RunConfig& cfg) { return load_csv(cfg.input, cfg.target, cfg.id_column); }

inline Dataset clean(const Dataset& ds, const CleaningPolicy& policy) {
    return cmlp::detail::in_stage("cleaning", [&] { return clean_sentinels(filter_labeled(ds, policy), policy); });
}

} // namespace detail

inline Report cmd_cluster(const RunConfig& cfg) {
    Report rep{make_meta(cfg), {}, {}};
    Dataset ds = detail::clean(detail::load_input(cfg), cfg.pipeline.cleaning);
    if (cfg.cluster_train_split) ds = holdout_split(ds, cfg.pipeline.split).train;
    if (cfg.normalize) ds = apply_normalization(ds, fit_normalization(ds));
    const ClusteringResult r = run_clustering(ds.features, cfg.pipeline.clustering);
    const std::size_t k = cluster_count(r);

    auto& b = rep.body;
    b["algorithm"] = to_string(r.algorithm);
    b["n"] = ds.size();
    b["d"] = ds.dims();
    b["k"] = k;
    b["noise"] = r.noise_count();
    b["cluster_sizes"] = r.cluster_sizes();
    OrderedJson reps = OrderedJson::array();
    for (std::size_t c = 0; c < r.representatives.rows(); ++c) {
        const auto row = r.representatives.row(c);
        reps.push_back(std::vector<double>(row.begin(), row.end()));
    }
    b["representatives"] = reps;
    b["row_ids"] = ds.row_ids;
    b["labels"] = r.labels;
    rep.timing["clustering_seconds"] = r.elapsed_seconds;
    return rep;
}

inline Report cmd_pipeline(const RunConfig& cfg) {
    Report rep{make_meta(cfg), {}, {}};
    const Dataset ds = detail::load_input(cfg);
    const PipelineRun run = run_pipeline_full(ds, cfg.pipeline);
    const PipelineReport& r = run.report;

    auto& b = rep.body;
    b["architecture"] = r.spec.to_string();
    b["k"] = r.k;
    b["rows"] = {{"loaded", r.rows_loaded},
                 {"clean", r.rows_clean},
                 {"train", run.split.train.size()},
                 {"test", run.split.test.size()}};
    b["cluster_sizes"] = run.clustering.cluster_sizes();
    b["target_scale"] = r.target_scale;
    b["metrics"] = {{"train", metrics_json(r.metrics_train, r.target_scale)},
                    {"validation", r.metrics_validation ? metrics_json(*r.metrics_validation, r.target_scale)
                                                        : OrderedJson(nullptr)},
                    {"test", metrics_json(r.metrics_test, r.target_scale)}};
    b["training"] = {{"initial_loss", r.train_report.initial_loss},
                     {"final_loss", r.train_report.final_loss},
                     {"iterations", r.train_report.iterations},
                     {"converged", r.train_report.converged},
                     {"best_restart", r.train_report.best_restart}};
    rep.timing["clustering_seconds"] = r.clustering_seconds;
    rep.timing["training_seconds"] = r.training_seconds;
    rep.timing["total_seconds"] = r.total_seconds;

    if (cfg.model_output) {
        auto out = detail::open_output(*cfg.model_output);
        save_model(out, run.model);
        if (!out) throw IoError("cannot write '" + *cfg.model_output + "'");
    }
    if (cfg.predictions_output) {
        auto out = detail::open_output(*cfg.predictions_output);
        out << "id,prediction,actual\n" << std::setprecision(17);
        const auto& test = run.split.test;
        for (std::size_t i = 0; i < test.size(); ++i)
            out << test.row_ids[i] << ',' << run.test_predictions[i] << ',' << test.targets[i] << '\n';
        if (!out) throw IoError("cannot write '" + *cfg.predictions_output + "'");
    }
    return rep;
}

inline Report cmd_sweep(const RunConfig& cfg) {
    Report rep{make_meta(cfg), {}, {}};
    const Dataset ds = detail::clean(detail::load_input(cfg), cfg.pipeline.cleaning);
    const SweepReport s = sweep_hidden(ds, cfg.widths, cfg.pipeline.split, cfg.pipeline.train);

    auto& b = rep.body;
    b["split_seed"] = cfg.pipeline.split.seed;
    b["target_scale"] = s.target_scale;
    b["rows"] = OrderedJson::array();
    rep.timing["rows"] = OrderedJson::array();
    for (const auto& e : s.entries) {
        b["rows"].push_back({{"hidden_width", e.hidden_width},
                             {"rms_train", e.rms_train},
                             {"rms_test", e.rms_test},
                             {"rms_test_normalized", e.rms_test / s.target_scale},
                             {"correlation", optional_number(e.correlation)}});
        rep.timing["rows"].push_back({{"hidden_width", e.hidden_width}, {"training_seconds", e.training_seconds}});
    }
    b["best_hidden_width"] = s.best_hidden_width;
    return rep;
}

inline Report cmd_stability(const RunConfig& cfg) {
    Report rep{make_meta(cfg), {}, {}};
    const Dataset ds = detail::load_input(cfg);
    const auto rows = kmin_stability(ds, cfg.kmins, cfg.pipeline);

    auto& b = rep.body;
    b["split_seed"] = cfg.pipeline.split.seed;
    b["rows"] = OrderedJson::array();
    rep.timing["rows"] = OrderedJson::array();
    for (const auto& r : rows) {
        b["rows"].push_back({{"kmin", r.kmin}, {"k", r.k}, {"rms_test", r.rms_test}});
        rep.timing["rows"].push_back(
            {{"kmin", r.kmin}, {"clustering_seconds", r.clustering_seconds}, {"training_seconds", r.training_seconds}});
    }
    return rep;
}

inline Report cmd_synth(const RunConfig& cfg) {
    Report rep{make_meta(cfg), {}, {}};
    const BlobSample s = synth_blobs(cfg.synth);
    const std::string& path = *cfg.output;
    {
        auto out = detail::open_output(path);
        write_csv(out, s.data);
        if (!out) throw IoError("cannot write '" + path + "'");
    }
    OrderedJson side;
    side["generator"] = "synth_blobs";
    side["true_k"] = s.true_k;
    side["rows"] = s.data.size();
    side["target"] = s.data.target_name;
    side["id_column"] = "id";
    side["spec"] = rep.meta.at("config").at("synth");
    OrderedJson centers = OrderedJson::array();
    for (std::size_t c = 0; c < s.centers.rows(); ++c) {
        const auto row = s.centers.row(c);
        centers.push_back(std::vector<double>(row.begin(), row.end()));
    }
    side["centers"] = centers;
    {
        const std::string meta_path = path + ".meta.json";
        auto out = detail::open_output(meta_path);
        out << side.dump(2) << '\n';
        if (!out) throw IoError("cannot write '" + meta_path + "'");
    }
    rep.body["output"] = path;
    rep.body["rows"] = s.data.size();
    rep.body["true_k"] = s.true_k;
    return rep;
}

/// Reads two numeric columns by name from a CSV with a header row; all other
/// columns are ignored.
inline std::pair<std::vector<double>, std::vector<double>>
read_prediction_columns(const std::string& path, const std::string& pred_col, const std::string& actual_col) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": missing header row");
    std::vector<std::string> header;
    for (auto f : cmlp::detail::split_fields(line)) header.push_back(cmlp::detail::unquote(f));
    auto column = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError(path + ": column '" + name + "' not in header");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t pc = column(pred_col);
    const std::size_t ac = column(actual_col);
    std::vector<double> pred, actual;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (cmlp::detail::trim(line).empty()) continue;
        const auto fields = cmlp::detail::split_fields(line);
        if (fields.size() != header.size())
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        auto parse = [&](std::size_t c) {
            const auto v = cmlp::detail::parse_real(fields[c]);
            if (!v)
                throw DataError(path + ": line " + std::to_string(line_no) + ", column '" + header[c] +
                                "': cannot parse '" + std::string(fields[c]) + "' as a finite real");
            return *v;
        };
        pred.push_back(parse(pc));
        actual.push_back(parse(ac));
    }
    return {std::move(pred), std::move(actual)};
}

inline Report cmd_evaluate(const RunConfig& cfg) {
    Report rep{make_meta(cfg), {}, {}};
    const auto [pred, actual] = read_prediction_columns(cfg.input, cfg.prediction_column, cfg.actual_column);
    const MetricBlock m = evaluate(pred, actual, cfg.pipeline.outlier_threshold);
    rep.body["metrics"] = metrics_json(m, 1.0);
    rep.body["metrics"].erase("rms_normalized");
    rep.body["outlier_threshold"] = cfg.pipeline.outlier_threshold;
    return rep;
}

inline Report execute(const RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const std::string started_at = utc_timestamp();
    Report r;
    switch (cfg.command) {
    case Command::Cluster: r = cmd_cluster(cfg); break;
    case Command::Pipeline: r = cmd_pipeline(cfg); break;
    case Command::Sweep: r = cmd_sweep(cfg); break;
    case Command::Stability: r = cmd_stability(cfg); break;
    case Command::Synth: r = cmd_synth(cfg); break;
    case Command::Evaluate: r = cmd_evaluate(cfg); break;
    }
    OrderedJson timing;
    timing["started_at"] = started_at;
    timing["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (auto it = r.timing.begin(); it != r.timing.end(); ++it) timing[it.key()] = it.value();
    r.timing = std::move(timing);
    return r;
}

/// Writes the report where the config says: the output path, or `out` when
/// there is none (synth always reports to `out`, its output is the CSV).
inline void emit(const RunConfig& cfg, const Report& r, std::ostream& out) {
    if (cfg.output && cfg.command != Command::Synth) {
        auto file = detail::open_output(*cfg.output);
        render(r, cfg.format, file);
        if (!file) throw IoError("cannot write '" + *cfg.output + "'");
    } else {
        render(r, cfg.format, out);
    }
}

/// Entry point shared by the executable and the tests. `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Clustering-constructed MLP regression toolkit", "cmlp"};
    app.set_version_flag("--version", std::string(CMLP_VERSION));
    app.require_subcommand(1);

    struct Options {
        std::string config;
        std::string input, output, format;
        std::uint64_t seed = 0;
        CLI::Option* input_opt = nullptr;
        CLI::Option* output_opt = nullptr;
        CLI::Option* seed_opt = nullptr;
        CLI::Option* format_opt = nullptr;
    };
    const std::vector<std::pair<Command, const char*>> commands = {
        {Command::Cluster, "Cluster a dataset and report cluster sizes and labels"},
        {Command::Pipeline, "Cluster, size the hidden layer, train and evaluate"},
        {Command::Sweep, "Train one network per hidden width (baseline)"},
        {Command::Stability, "Repeat the pipeline for several X-means kmin values"},
        {Command::Synth, "Write a synthetic blob dataset as CSV"},
        {Command::Evaluate, "Compute metrics from a predictions CSV"},
    };
    std::vector<std::unique_ptr<Options>> opts;
    std::vector<CLI::App*> subs;
    for (const auto& [cmd, help] : commands) {
        auto o = std::make_unique<Options>();
        CLI::App* sub = app.add_subcommand(to_string(cmd), help);
        sub->add_option("-c,--config", o->config, "JSON config document");
        o->input_opt = sub->add_option("-i,--input", o->input, "Input CSV (overrides config)");
        o->output_opt = sub->add_option("-o,--output", o->output, "Output path (overrides config)");
        o->seed_opt = sub->add_option("-s,--seed", o->seed, "Seed applied to every seeded stage");
        o->format_opt = sub->add_option("-f,--format", o->format, "Report format: json or text");
        opts.push_back(std::move(o));
        subs.push_back(sub);
    }

    std::vector<std::string> argv_store{"cmlp"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigFailure;
    }

    std::size_t which = 0;
    while (!subs[which]->parsed()) ++which;
    const Command cmd = commands[which].first;
    const Options& o = *opts[which];

    try {
        Overrides ov;
        if (*o.input_opt) ov.input = o.input;
        if (*o.output_opt) ov.output = o.output;
        if (*o.seed_opt) ov.seed = o.seed;
        if (*o.format_opt) ov.format = parse_format(o.format);
        const Json doc = o.config.empty() ? Json::object() : read_config_file(o.config);
        const RunConfig cfg = parse_config(cmd, doc, ov);
        emit(cfg, execute(cfg), out);
        return kOk;
    } catch (const ConfigError& e) {
        err << "cmlp: config error: " << e.what() << '\n';
        return kConfigFailure;
    } catch (const DataError& e) {
        err << "cmlp: data error: " << e.what() << '\n';
        return kDataFailure;
    } catch (const NumericalError& e) {
        err << "cmlp: numerical error: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const std::exception& e) {
        err << "cmlp: error: " << e.what() << '\n';
        return kFailure;
    }
}

} // namespace cmlp::cli
