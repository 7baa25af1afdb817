#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmlp/cli/config.hpp"

namespace cmlp::cli {

using OrderedJson = nlohmann::ordered_json;

inline constexpr int kReportSchema = 1;

/// A command's output. `body` depends only on config and data; wall-clock
/// values go to `timing`.
struct Report {
    OrderedJson meta;
    OrderedJson body;
    OrderedJson timing;

    OrderedJson to_json() const { return {{"meta", meta}, {"body", body}, {"timing", timing}}; }
};

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline OrderedJson make_meta(const RunConfig& cfg) {
    OrderedJson seeds = OrderedJson::object();
    const auto& p = cfg.pipeline;
    switch (cfg.command) {
    case Command::Synth: seeds["synth"] = cfg.synth.seed; break;
    case Command::Evaluate: break;
    default:
        if (const auto* x = std::get_if<XMeansConfig>(&p.clustering); x && cfg.command != Command::Sweep)
            seeds["clustering"] = x->seed;
        if (cfg.command != Command::Cluster || cfg.cluster_train_split) seeds["split"] = p.split.seed;
        if (cfg.command != Command::Cluster) seeds["train"] = p.train.init_scale_seed;
    }
    OrderedJson m;
    m["artifact"] = "cmlp";
    m["version"] = CMLP_VERSION;
    m["report_schema"] = kReportSchema;
    m["command"] = to_string(cfg.command);
    m["config_digest"] = config_digest(cfg);
    m["seeds"] = seeds;
    m["config"] = OrderedJson::parse(canonical_config(cfg).dump());
    return m;
}

inline OrderedJson optional_number(const std::optional<double>& v) {
    return v ? OrderedJson(*v) : OrderedJson(nullptr);
}

inline OrderedJson metrics_json(const MetricBlock& m, double target_scale) {
    OrderedJson j;
    j["n"] = m.n;
    j["rms"] = m.rms;
    j["rms_normalized"] = m.rms / target_scale;
    j["norm_rms"] = m.norm_rms;
    j["bias"] = m.bias;
    j["outlier_fraction"] = m.outlier_fraction;
    j["correlation"] = optional_number(m.correlation);
    return j;
}

// ---------------------------------------------------------------------------
// Aligned-text rendering

namespace detail {

class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
    void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

    void print(std::ostream& out) const {
        std::vector<std::size_t> w(header_.size());
        for (std::size_t c = 0; c < header_.size(); ++c) w[c] = header_[c].size();
        for (const auto& r : rows_)
            for (std::size_t c = 0; c < r.size(); ++c) w[c] = std::max(w[c], r[c].size());
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t c = 0; c < r.size(); ++c) {
                if (c) out << "  ";
                const std::string pad(w[c] - r[c].size(), ' ');
                if (c == 0) out << r[c] << pad;
                else out << pad << r[c];
            }
            out << '\n';
        };
        line(header_);
        std::vector<std::string> rule;
        for (std::size_t c = 0; c < w.size(); ++c) rule.emplace_back(w[c], '-');
        line(rule);
        for (const auto& r : rows_) line(r);
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline std::string num(const OrderedJson& v, int precision = 4) {
    if (v.is_null()) return "-";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v.get<double>());
    return buf;
}

inline std::string secs(const OrderedJson& v) { return num(v, 3) + "s"; }

} // namespace detail

inline void render_text(const Report& r, std::ostream& out) {
    using detail::num;
    using detail::secs;
    using detail::Table;
    const std::string cmd = r.meta.at("command").get<std::string>();
    const auto& b = r.body;
    const auto& t = r.timing;
    out << "cmlp " << cmd << "  (" << r.meta.at("config_digest").get<std::string>() << ")\n\n";

    if (cmd == "cluster") {
        out << "algorithm " << b.at("algorithm").get<std::string>() << ", n = " << num(b.at("n")) << ", k = "
            << num(b.at("k")) << ", noise = " << num(b.at("noise")) << ", time " << secs(t.at("clustering_seconds"))
            << "\n\n";
        Table tab({"cluster", "size"});
        const auto& sizes = b.at("cluster_sizes");
        for (std::size_t c = 0; c < sizes.size(); ++c) tab.add({std::to_string(c), num(sizes[c])});
        tab.print(out);
    } else if (cmd == "pipeline") {
        out << "architecture " << b.at("architecture").get<std::string>() << "\n";
        out << "rows: loaded " << num(b.at("rows").at("loaded")) << ", clean " << num(b.at("rows").at("clean"))
            << ", train " << num(b.at("rows").at("train")) << ", test " << num(b.at("rows").at("test")) << "\n\n";
        Table tab({"split", "n", "RMS", "RMS (norm. units)", "Norm.RMS", "Bias", "Outliers", "Corr"});
        for (const char* part : {"train", "validation", "test"}) {
            const auto& m = b.at("metrics").at(part);
            if (m.is_null()) continue;
            tab.add({part, num(m.at("n")), num(m.at("rms")), num(m.at("rms_normalized")), num(m.at("norm_rms")),
                     num(m.at("bias")), num(m.at("outlier_fraction")), num(m.at("correlation"))});
        }
        tab.print(out);
        out << "\nclustering " << secs(t.at("clustering_seconds")) << ", training " << secs(t.at("training_seconds"))
            << ", total " << secs(t.at("total_seconds")) << "\n";
    } else if (cmd == "sweep") {
        Table tab({"width", "RMS train", "RMS test", "RMS test (norm.)", "Corr", "time"});
        const auto& rows = b.at("rows");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& e = rows[i];
            tab.add({num(e.at("hidden_width")), num(e.at("rms_train")), num(e.at("rms_test")),
                     num(e.at("rms_test_normalized")), num(e.at("correlation")),
                     secs(t.at("rows")[i].at("training_seconds"))});
        }
        tab.print(out);
        out << "\nbest hidden width " << num(b.at("best_hidden_width")) << "\n";
    } else if (cmd == "stability") {
        out << "split seed " << num(b.at("split_seed")) << "\n\n";
        Table tab({"kmin", "k", "clustering", "training", "RMS test"});
        const auto& rows = b.at("rows");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& e = rows[i];
            tab.add({num(e.at("kmin")), num(e.at("k")), secs(t.at("rows")[i].at("clustering_seconds")),
                     secs(t.at("rows")[i].at("training_seconds")), num(e.at("rms_test"))});
        }
        tab.print(out);
    } else if (cmd == "synth") {
        out << "wrote " << num(b.at("rows")) << " rows, true k = " << num(b.at("true_k")) << ", to "
            << b.at("output").get<std::string>() << "\n";
    } else if (cmd == "evaluate") {
        const auto& m = b.at("metrics");
        Table tab({"n", "RMS", "Norm.RMS", "Bias", "Outliers", "Corr"});
        tab.add({num(m.at("n")), num(m.at("rms")), num(m.at("norm_rms")), num(m.at("bias")),
                 num(m.at("outlier_fraction")), num(m.at("correlation"))});
        tab.print(out);
    }
}

inline void render(const Report& r, Format f, std::ostream& out) {
    if (f == Format::Json) out << r.to_json().dump(2) << '\n';
    else render_text(r, out);
}

} // namespace cmlp::cli
