#pragma once

#include <cstdint>
#include <cstdio>
#include <type_traits>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmlp/constructor.hpp"

namespace cmlp::cli {

using Json = nlohmann::json;

inline constexpr int kConfigVersion = 1;

enum class Command { Cluster, Pipeline, Sweep, Stability, Synth, Evaluate };
enum class Format { Json, Text };

inline const char* to_string(Command c) {
    switch (c) {
    case Command::Cluster: return "cluster";
    case Command::Pipeline: return "pipeline";
    case Command::Sweep: return "sweep";
    case Command::Stability: return "stability";
    case Command::Synth: return "synth";
    case Command::Evaluate: return "evaluate";
    }
    return "?";
}

inline Format parse_format(const std::string& s) {
    if (s == "json") return Format::Json;
    if (s == "text") return Format::Text;
    throw ConfigError("format must be \"json\" or \"text\", got \"" + s + "\"");
}

/// Command-line values that take precedence over the config document.
struct Overrides {
    std::optional<std::string> input;
    std::optional<std::string> output;
    std::optional<std::uint64_t> seed;
    std::optional<Format> format;
};

/// A fully validated config document for one command.
struct RunConfig {
    Command command = Command::Pipeline;
    std::string input;
    std::string target;
    std::optional<std::string> id_column;
    std::optional<std::string> output;
    Format format = Format::Json;

    PipelineConfig pipeline;
    /// cluster: z-score features before clustering.
    bool normalize = true;
    /// cluster: restrict to the training side of the holdout split.
    bool cluster_train_split = false;
    std::vector<std::size_t> widths;
    std::vector<std::size_t> kmins;
    std::optional<std::string> model_output;
    std::optional<std::string> predictions_output;
    BlobSpec synth;
    std::string prediction_column = "prediction";
    std::string actual_column = "actual";
};

namespace detail {

/// Reads one JSON object, remembering which keys were consumed so that
/// anything left over can be reported as unknown.
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("" + where() + " must be an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    template <class T>
    void get(const char* key, T& out) {
        auto it = j_.find(key);
        if (it == j_.end()) return;
        seen_.insert(key);
        convert(*it, name(key), out);
    }

    template <class T>
    void get(const char* key, std::optional<T>& out) {
        auto it = j_.find(key);
        if (it == j_.end()) return;
        seen_.insert(key);
        T v{};
        convert(*it, name(key), v);
        out = std::move(v);
    }

    std::optional<Reader> child(const char* key) {
        auto it = j_.find(key);
        if (it == j_.end()) return std::nullopt;
        seen_.insert(key);
        return Reader(*it, name(key));
    }

    /// Throws on the first key (alphabetically) that was never read.
    void finish(const std::string& context = "") const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError("unknown key '" + name(it.key()) + "'" + context);
    }

private:
    std::string where() const { return path_.empty() ? "document" : "'" + path_ + "'"; }
    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    [[noreturn]] static void type_error(const std::string& key, const char* expected) {
        throw ConfigError("key '" + key + "': expected " + expected);
    }

    static void convert(const Json& v, const std::string& key, double& out) {
        if (!v.is_number()) type_error(key, "a number");
        out = v.get<double>();
    }
    template <class U>
        requires(std::is_unsigned_v<U> && !std::is_same_v<U, bool>)
    static void convert(const Json& v, const std::string& key, U& out) {
        if (!v.is_number_unsigned()) type_error(key, "a non-negative integer");
        out = v.get<U>();
    }
    static void convert(const Json& v, const std::string& key, int& out) {
        if (!v.is_number_integer()) type_error(key, "an integer");
        out = v.get<int>();
    }
    static void convert(const Json& v, const std::string& key, bool& out) {
        if (!v.is_boolean()) type_error(key, "true or false");
        out = v.get<bool>();
    }
    static void convert(const Json& v, const std::string& key, std::string& out) {
        if (!v.is_string()) type_error(key, "a string");
        out = v.get<std::string>();
    }
    static void convert(const Json& v, const std::string& key, std::vector<double>& out) {
        if (!v.is_array()) type_error(key, "an array of numbers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number()) type_error(key, "an array of numbers");
            out.push_back(e.get<double>());
        }
    }
    static void convert(const Json& v, const std::string& key, std::vector<std::size_t>& out) {
        if (!v.is_array()) type_error(key, "an array of non-negative integers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number_unsigned()) type_error(key, "an array of non-negative integers");
            out.push_back(e.get<std::size_t>());
        }
    }

    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline ClusteringConfig read_clustering(Reader r) {
    std::string algorithm = "xmeans";
    r.get("algorithm", algorithm);
    if (algorithm == "xmeans") {
        XMeansConfig c;
        r.get("kmin", c.kmin);
        r.get("kmax", c.kmax);
        r.get("max_split_rounds", c.max_split_rounds);
        r.get("split_attempts", c.split_attempts);
        r.get("kmeans_max_iter", c.kmeans_max_iter);
        r.get("kmeans_tol", c.kmeans_tol);
        r.get("seed", c.seed);
        r.finish(" for algorithm xmeans");
        return c;
    }
    if (algorithm == "dbscan") {
        DbscanConfig c;
        r.get("eps", c.eps);
        r.get("min_pts", c.min_pts);
        r.finish(" for algorithm dbscan");
        return c;
    }
    if (algorithm == "meanshift") {
        MeanShiftConfig c;
        r.get("bandwidth", c.bandwidth);
        r.get("shift_tol", c.shift_tol);
        r.get("max_iter", c.max_iter);
        r.get("merge_radius", c.merge_radius);
        r.finish(" for algorithm meanshift");
        return c;
    }
    throw ConfigError("key 'clustering.algorithm': expected \"xmeans\", \"dbscan\" or \"meanshift\", got \"" +
                      algorithm + "\"");
}

inline SplitSpec read_split(Reader r) {
    SplitSpec s;
    r.get("train_fraction", s.train_fraction);
    r.get("seed", s.seed);
    r.finish();
    return s;
}

inline TrainConfig read_train(Reader r) {
    TrainConfig t;
    r.get("lbfgs_memory", t.lbfgs_memory);
    r.get("max_iter", t.max_iter);
    r.get("grad_tol", t.grad_tol);
    r.get("wolfe_c1", t.wolfe_c1);
    r.get("wolfe_c2", t.wolfe_c2);
    r.get("seed", t.init_scale_seed);
    r.get("restarts", t.restarts);
    r.finish();
    return t;
}

inline CleaningPolicy read_cleaning(Reader r) {
    CleaningPolicy c;
    r.get("target_missing_sentinel", c.target_missing_sentinel);
    r.get("feature_sentinels", c.feature_sentinels);
    std::string policy = "drop";
    r.get("row_policy", policy);
    if (policy == "drop") c.row_policy = RowPolicy::DropRowIfAnySentinel;
    else if (policy == "keep") c.row_policy = RowPolicy::KeepRows;
    else throw ConfigError("key 'cleaning.row_policy': expected \"drop\" or \"keep\", got \"" + policy + "\"");
    r.finish();
    return c;
}

inline BlobSpec read_synth(Reader r) {
    BlobSpec b;
    r.get("k", b.k);
    r.get("per_cluster", b.per_cluster);
    r.get("d", b.d);
    r.get("separation", b.separation);
    r.get("noise_std", b.noise_std);
    std::string fn = "linear_of_center";
    r.get("target_fn", fn);
    if (fn == "linear_of_center") b.target_fn = TargetFn::LinearOfCenter;
    else if (fn == "sum_of_features") b.target_fn = TargetFn::SumOfFeatures;
    else throw ConfigError("key 'synth.target_fn': expected \"linear_of_center\" or \"sum_of_features\"");
    r.get("seed", b.seed);
    r.finish();
    return b;
}

inline void validate_blob_spec(const BlobSpec& b) {
    if (b.k == 0 || b.per_cluster == 0 || b.d == 0) throw ConfigError("synth: k, per_cluster and d must be positive");
    if (!(b.separation > 0.0)) throw ConfigError("synth: separation must be positive");
    if (!(b.noise_std > 0.0)) throw ConfigError("synth: noise_std must be positive");
}

} // namespace detail

/// Parses and validates a config document for `command`, applying the
/// command-line overrides. Nothing is read from disk besides the document.
inline RunConfig parse_config(Command command, const Json& doc, const Overrides& ov = {}) {
    using detail::Reader;
    RunConfig cfg;
    cfg.command = command;
    const std::string context = std::string(" for command ") + to_string(command);
    Reader r(doc, "");

    int version = kConfigVersion;
    r.get("version", version);
    if (version != kConfigVersion)
        throw ConfigError("unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kConfigVersion) + ")");
    r.get("output", cfg.output);
    std::string format = "json";
    r.get("format", format);
    cfg.format = parse_format(format);

    const bool data_command = command != Command::Synth;
    if (data_command) {
        r.get("input", cfg.input);
        if (command == Command::Evaluate) {
            r.get("prediction_column", cfg.prediction_column);
            r.get("actual_column", cfg.actual_column);
        } else {
            r.get("target", cfg.target);
        }
        if (command != Command::Evaluate) r.get("id_column", cfg.id_column);
    }

    const bool uses_clustering =
        command == Command::Cluster || command == Command::Pipeline || command == Command::Stability;
    if (uses_clustering)
        if (auto c = r.child("clustering")) cfg.pipeline.clustering = detail::read_clustering(*c);
    if (command != Command::Synth && command != Command::Evaluate) {
        if (auto c = r.child("cleaning")) cfg.pipeline.cleaning = detail::read_cleaning(*c);
        if (auto c = r.child("split")) {
            cfg.pipeline.split = detail::read_split(*c);
            cfg.cluster_train_split = true;
        }
    }
    if (command == Command::Pipeline || command == Command::Sweep || command == Command::Stability)
        if (auto c = r.child("train")) cfg.pipeline.train = detail::read_train(*c);
    if (command == Command::Pipeline || command == Command::Stability) {
        r.get("validation_fit_fraction", cfg.pipeline.validation_fit_fraction);
        r.get("outlier_threshold", cfg.pipeline.outlier_threshold);
    }
    if (command == Command::Evaluate) r.get("outlier_threshold", cfg.pipeline.outlier_threshold);
    if (command == Command::Cluster) r.get("normalize", cfg.normalize);
    if (command == Command::Pipeline) {
        r.get("model_output", cfg.model_output);
        r.get("predictions_output", cfg.predictions_output);
    }
    if (command == Command::Sweep) r.get("widths", cfg.widths);
    if (command == Command::Stability) r.get("kmins", cfg.kmins);
    if (command == Command::Synth)
        if (auto c = r.child("synth")) cfg.synth = detail::read_synth(*c);
    r.finish(context);

    if (ov.input) cfg.input = *ov.input;
    if (ov.output) cfg.output = *ov.output;
    if (ov.format) cfg.format = *ov.format;
    if (ov.seed) {
        const std::uint64_t s = *ov.seed;
        if (auto* x = std::get_if<XMeansConfig>(&cfg.pipeline.clustering)) x->seed = s;
        cfg.pipeline.split.seed = s;
        cfg.pipeline.train.init_scale_seed = s;
        cfg.synth.seed = s;
    }

    // Validation of everything before any data is touched.
    if (data_command && cfg.input.empty()) throw ConfigError("'input' is required" + context);
    if (data_command && command != Command::Evaluate && cfg.target.empty())
        throw ConfigError("'target' is required" + context);
    if (command == Command::Synth && !cfg.output) throw ConfigError("'output' is required for command synth");
    cfg.pipeline.validate();
    if (command == Command::Synth) detail::validate_blob_spec(cfg.synth);
    if (command == Command::Sweep) {
        if (cfg.widths.empty()) throw ConfigError("'widths' must be a non-empty array for command sweep");
        for (std::size_t w : cfg.widths)
            if (w == 0) throw ConfigError("'widths' entries must be positive");
    }
    if (command == Command::Stability) {
        if (cfg.pipeline.algorithm() != Algorithm::XMeans)
            throw ConfigError("command stability requires clustering.algorithm = \"xmeans\"");
        if (cfg.kmins.empty()) throw ConfigError("'kmins' must be a non-empty array for command stability");
        const auto& x = std::get<XMeansConfig>(cfg.pipeline.clustering);
        for (std::size_t k : cfg.kmins) {
            if (k == 0) throw ConfigError("'kmins' entries must be positive");
            if (x.kmax != 0 && k > x.kmax)
                throw ConfigError("kmin " + std::to_string(k) + " exceeds clustering.kmax " +
                                  std::to_string(x.kmax));
        }
    }
    if (command == Command::Evaluate && cfg.prediction_column == cfg.actual_column)
        throw ConfigError("prediction_column and actual_column must differ");
    return cfg;
}

inline Json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Canonical form, used for the report header and the config digest.

inline Json clustering_to_json(const ClusteringConfig& c) {
    return std::visit(
        [](const auto& x) -> Json {
            using C = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<C, XMeansConfig>)
                return {{"algorithm", "xmeans"},       {"kmin", x.kmin},
                        {"kmax", x.kmax},              {"max_split_rounds", x.max_split_rounds},
                        {"split_attempts", x.split_attempts}, {"kmeans_max_iter", x.kmeans_max_iter},
                        {"kmeans_tol", x.kmeans_tol},  {"seed", x.seed}};
            else if constexpr (std::is_same_v<C, DbscanConfig>)
                return {{"algorithm", "dbscan"}, {"eps", x.eps}, {"min_pts", x.min_pts}};
            else
                return {{"algorithm", "meanshift"},  {"bandwidth", x.bandwidth}, {"shift_tol", x.shift_tol},
                        {"max_iter", x.max_iter}, {"merge_radius", x.merge_radius}};
        },
        c);
}

/// The effective configuration with every default filled in. Output path
/// and format are left out: they change where a report goes, not what it says.
inline Json canonical_config(const RunConfig& c) {
    Json j;
    j["version"] = kConfigVersion;
    j["command"] = to_string(c.command);
    const auto& p = c.pipeline;
    if (c.command == Command::Synth) {
        j["synth"] = {{"k", c.synth.k},
                      {"per_cluster", c.synth.per_cluster},
                      {"d", c.synth.d},
                      {"separation", c.synth.separation},
                      {"noise_std", c.synth.noise_std},
                      {"target_fn", c.synth.target_fn == TargetFn::LinearOfCenter ? "linear_of_center" : "sum_of_features"},
                      {"seed", c.synth.seed}};
        return j;
    }
    j["input"] = c.input;
    if (c.command == Command::Evaluate) {
        j["prediction_column"] = c.prediction_column;
        j["actual_column"] = c.actual_column;
        j["outlier_threshold"] = p.outlier_threshold;
        return j;
    }
    j["target"] = c.target;
    j["id_column"] = c.id_column ? Json(*c.id_column) : Json(nullptr);
    j["cleaning"] = {{"target_missing_sentinel", p.cleaning.target_missing_sentinel},
                     {"feature_sentinels", p.cleaning.feature_sentinels},
                     {"row_policy", p.cleaning.row_policy == RowPolicy::KeepRows ? "keep" : "drop"}};
    if (c.command != Command::Cluster || c.cluster_train_split)
        j["split"] = {{"train_fraction", p.split.train_fraction}, {"seed", p.split.seed}};
    if (c.command != Command::Sweep) j["clustering"] = clustering_to_json(p.clustering);
    if (c.command == Command::Cluster) j["normalize"] = c.normalize;
    if (c.command == Command::Pipeline || c.command == Command::Sweep || c.command == Command::Stability)
        j["train"] = {{"lbfgs_memory", p.train.lbfgs_memory}, {"max_iter", p.train.max_iter},
                      {"grad_tol", p.train.grad_tol},         {"wolfe_c1", p.train.wolfe_c1},
                      {"wolfe_c2", p.train.wolfe_c2},         {"seed", p.train.init_scale_seed},
                      {"restarts", p.train.restarts}};
    if (c.command == Command::Pipeline || c.command == Command::Stability) {
        j["validation_fit_fraction"] = p.validation_fit_fraction;
        j["outlier_threshold"] = p.outlier_threshold;
    }
    if (c.command == Command::Sweep) j["widths"] = c.widths;
    if (c.command == Command::Stability) j["kmins"] = c.kmins;
    return j;
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_digest(const RunConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_config(c).dump())));
    return std::string("fnv1a64:") + buf;
}

} // namespace cmlp::cli
