#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cmlp/core/error.hpp"
#include "cmlp/core/matrix.hpp"
#include "cmlp/core/random.hpp"

namespace cmlp {

/// Regression dataset: n×d features, a real target per row, and row metadata.
struct Dataset {
    Matrix features;
    std::vector<double> targets;
    std::vector<std::string> feature_names;
    std::vector<std::string> row_ids;
    std::string target_name = "target";

    std::size_t size() const noexcept { return targets.size(); }
    std::size_t dims() const noexcept { return features.cols(); }

    /// Rows selected by index, in the given order.
    Dataset subset(std::span<const std::size_t> idx) const {
        Dataset out;
        out.features = features.select_rows(idx);
        out.targets.reserve(idx.size());
        out.row_ids.reserve(idx.size());
        for (std::size_t i : idx) {
            out.targets.push_back(targets[i]);
            out.row_ids.push_back(row_ids[i]);
        }
        out.feature_names = feature_names;
        out.target_name = target_name;
        return out;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class RowPolicy { DropRowIfAnySentinel, KeepRows };

struct CleaningPolicy {
    double target_missing_sentinel = -9.999;
    std::vector<double> feature_sentinels = {99.0, -99.0};
    RowPolicy row_policy = RowPolicy::DropRowIfAnySentinel;

    void validate() const {
        if (row_policy == RowPolicy::DropRowIfAnySentinel && feature_sentinels.empty())
            throw ConfigError("cleaning: feature_sentinels must be non-empty when dropping rows");
    }
};

/// Per-column z-score parameters. Every scale is strictly positive.
struct NormalizationParams {
    std::vector<double> center;
    std::vector<double> scale;
    double target_center = 0.0;
    double target_scale = 1.0;

    static NormalizationParams identity(std::size_t d) {
        return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0), 0.0, 1.0};
    }

    double normalize_target(double y) const { return (y - target_center) / target_scale; }
    double denormalize_target(double y) const { return y * target_scale + target_center; }

    friend bool operator==(const NormalizationParams&, const NormalizationParams&) = default;
};

struct SplitSpec {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw ConfigError("split: train_fraction must lie in (0, 1)");
    }
};

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string unquote(std::string_view s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return std::string(s);
}

inline std::optional<double> parse_real(std::string_view s) {
    if (s.empty()) return std::nullopt;
    // from_chars rejects a leading '+', which some exporters write
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace detail

/// Reads a comma-separated file with a header row. Every column other than
/// the target and the optional id column becomes a feature, in header order.
/// Sentinel values are kept verbatim.
inline Dataset load_csv(std::istream& in, const std::string& target_column,
                        const std::optional<std::string>& id_column = std::nullopt,
                        const std::string& source = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    std::vector<std::string> header;
    for (auto f : detail::split_fields(line)) header.push_back(detail::unquote(f));

    auto find_column = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto target_idx = find_column(target_column);
    if (!target_idx) throw DataError(source + ": target column '" + target_column + "' not in header");
    std::optional<std::size_t> id_idx;
    if (id_column) {
        id_idx = find_column(*id_column);
        if (!id_idx) throw DataError(source + ": id column '" + *id_column + "' not in header");
        if (*id_idx == *target_idx) throw DataError(source + ": id column equals target column");
    }

    Dataset ds;
    ds.target_name = target_column;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == *target_idx || (id_idx && c == *id_idx)) continue;
        feature_cols.push_back(c);
        ds.feature_names.push_back(header[c]);
    }
    if (feature_cols.empty()) throw DataError(source + ": no feature columns");

    std::vector<double> values;
    std::vector<double> row_buf(feature_cols.size());
    std::size_t data_row = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        ++data_row;
        const auto fields = detail::split_fields(line);
        auto where = [&] {
            return source + ": data row " + std::to_string(data_row) + " (line " +
                   std::to_string(line_no) + ")";
        };
        if (fields.size() != header.size())
            throw DataError(where() + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        auto parse = [&](std::size_t c) {
            const auto v = detail::parse_real(fields[c]);
            if (!v)
                throw DataError(where() + ", column '" + header[c] + "': cannot parse '" +
                                std::string(fields[c]) + "' as a finite real");
            return *v;
        };
        for (std::size_t j = 0; j < feature_cols.size(); ++j) row_buf[j] = parse(feature_cols[j]);
        ds.features.append_row(row_buf);
        ds.targets.push_back(parse(*target_idx));
        if (id_idx) {
            if (fields[*id_idx].empty()) throw DataError(where() + ": empty id");
            ds.row_ids.push_back(detail::unquote(fields[*id_idx]));
        } else {
            ds.row_ids.push_back(std::to_string(data_row));
        }
    }
    if (data_row == 0) throw DataError(source + ": empty data section");
    return ds;
}

inline Dataset load_csv(const std::string& path, const std::string& target_column,
                        const std::optional<std::string>& id_column = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return load_csv(in, target_column, id_column, path);
}

/// Writes `ds` in the ingestion schema (id column first, target last) at full precision.
inline void write_csv(std::ostream& out, const Dataset& ds, const std::string& id_column = "id") {
    out << id_column;
    for (const auto& name : ds.feature_names) out << ',' << name;
    out << ',' << ds.target_name << '\n';
    out << std::setprecision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.row_ids[i];
        for (double v : ds.features.row(i)) out << ',' << v;
        out << ',' << ds.targets[i] << '\n';
    }
}

// ---------------------------------------------------------------------------
// Cleaning

namespace detail {

template <class Keep>
Dataset filter_rows(const Dataset& ds, Keep keep, const char* empty_message) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (keep(i)) idx.push_back(i);
    if (idx.empty()) throw DataError(empty_message);
    return ds.subset(idx);
}

} // namespace detail

/// Keeps rows whose target is not the missing-target sentinel (exact match).
inline Dataset filter_labeled(const Dataset& ds, const CleaningPolicy& policy) {
    return detail::filter_rows(
        ds, [&](std::size_t i) { return ds.targets[i] != policy.target_missing_sentinel; },
        "no labeled rows");
}

/// Drops rows holding any feature sentinel (exact match). KeepRows is a no-op.
inline Dataset clean_sentinels(const Dataset& ds, const CleaningPolicy& policy) {
    if (policy.row_policy == RowPolicy::KeepRows) return ds;
    policy.validate();
    const std::set<double> sentinels(policy.feature_sentinels.begin(), policy.feature_sentinels.end());
    return detail::filter_rows(
        ds,
        [&](std::size_t i) {
            for (double v : ds.features.row(i))
                if (sentinels.contains(v)) return false;
            return true;
        },
        "no rows left after removing feature sentinels");
}

// ---------------------------------------------------------------------------
// Splitting

struct Split {
    Dataset train;
    Dataset test;
};

/// Row indices of a seeded shuffle-then-cut split. Each side is returned in
/// ascending (original) order.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
holdout_indices(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    if (n < 2) throw DataError("holdout split needs at least 2 rows");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(spec.seed);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);

    // The epsilon keeps products like 0.7 * 10 from flooring to 6.
    auto cut = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n) + 1e-9));
    cut = std::clamp<std::size_t>(cut, 1, n - 1);

    std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(cut), perm.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

inline Split holdout_split(const Dataset& ds, const SplitSpec& spec) {
    const auto [train, test] = holdout_indices(ds.size(), spec);
    return {ds.subset(train), ds.subset(test)};
}

// ---------------------------------------------------------------------------
// Normalization

/// Column means and population standard deviations; zero-variance columns get scale 1.
inline NormalizationParams fit_normalization(const Dataset& train) {
    const std::size_t n = train.size();
    const std::size_t d = train.dims();
    if (n == 0) throw DataError("cannot fit normalization on an empty dataset");

    auto moments = [n](auto&& value_at, const std::string& column) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += value_at(i);
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = value_at(i) - mean;
            ss += t * t;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (!std::isfinite(mean) || !std::isfinite(sd))
            throw NumericalError("overflow in column '" + column + "'");
        return std::pair{mean, sd > 0.0 ? sd : 1.0};
    };

    NormalizationParams p;
    p.center.resize(d);
    p.scale.resize(d);
    for (std::size_t j = 0; j < d; ++j)
        std::tie(p.center[j], p.scale[j]) = moments([&](std::size_t i) { return train.features(i, j); },
                                                    j < train.feature_names.size() ? train.feature_names[j]
                                                                                   : std::to_string(j));
    std::tie(p.target_center, p.target_scale) =
        moments([&](std::size_t i) { return train.targets[i]; }, train.target_name.empty() ? "target" : train.target_name);
    return p;
}

inline void check_width(const NormalizationParams& p, std::size_t d) {
    if (p.center.size() != d || p.scale.size() != d)
        throw DataError("normalization expects " + std::to_string(p.center.size()) +
                        " features, dataset has " + std::to_string(d));
}

inline Dataset apply_normalization(const Dataset& ds, const NormalizationParams& p) {
    check_width(p, ds.dims());
    Dataset out = ds;
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto r = out.features.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - p.center[j]) / p.scale[j];
        out.targets[i] = p.normalize_target(out.targets[i]);
    }
    return out;
}

inline Dataset invert_normalization(const Dataset& ds, const NormalizationParams& p) {
    check_width(p, ds.dims());
    Dataset out = ds;
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto r = out.features.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] = r[j] * p.scale[j] + p.center[j];
        out.targets[i] = p.denormalize_target(out.targets[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

enum class TargetFn { LinearOfCenter, SumOfFeatures };

struct BlobSpec {
    std::size_t k = 3;
    std::size_t per_cluster = 50;
    std::size_t d = 2;
    double separation = 10.0;
    double noise_std = 0.5;
    TargetFn target_fn = TargetFn::LinearOfCenter;
    std::uint64_t seed = 0;
};

/// Generated blobs together with the ground truth they were drawn from.
struct BlobSample {
    Dataset data;
    std::size_t true_k = 0;
    std::vector<int> true_labels;
    Matrix centers;
};

/// Isotropic Gaussian blobs whose centers are pairwise at least `separation` apart.
///
/// LinearOfCenter targets are <w, center> / separation for a seeded unit
/// vector w, constant within a blob. SumOfFeatures targets are the row sums.
/// Rows are ordered blob by blob.
inline BlobSample synth_blobs(const BlobSpec& spec) {
    if (spec.k == 0 || spec.per_cluster == 0 || spec.d == 0)
        throw ConfigError("synth: k, per_cluster and d must be positive");
    if (!(spec.separation > 0.0)) throw ConfigError("synth: separation must be positive");
    if (!(spec.noise_std > 0.0)) throw ConfigError("synth: noise_std must be positive");

    Rng rng(spec.seed);
    const auto k = spec.k;
    const auto d = spec.d;

    // Rejection-sample centers in a cube; widen the cube whenever placement stalls.
    Matrix centers(k, d);
    double side = 2.0 * spec.separation * std::ceil(std::pow(static_cast<double>(k), 1.0 / static_cast<double>(d)));
    const double min_d2 = spec.separation * spec.separation;
    std::size_t placed = 0;
    std::size_t attempts = 0;
    while (placed < k) {
        auto c = centers.row(placed);
        for (double& x : c) x = rng.uniform(0.0, side);
        bool ok = true;
        for (std::size_t q = 0; q < placed && ok; ++q) ok = squared_distance(c, centers.row(q)) >= min_d2;
        if (ok) {
            ++placed;
            attempts = 0;
        } else if (++attempts == 1000) {
            side *= 1.5;
            attempts = 0;
        }
    }

    std::vector<double> w(d);
    rng.unit_vector(w);

    BlobSample out;
    out.true_k = k;
    out.centers = centers;
    Dataset& ds = out.data;
    for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j + 1));
    ds.target_name = "y";

    std::vector<double> x(d);
    for (std::size_t c = 0; c < k; ++c) {
        const auto center = centers.row(c);
        double center_value = 0.0;
        for (std::size_t j = 0; j < d; ++j) center_value += w[j] * center[j];
        center_value /= spec.separation;
        for (std::size_t p = 0; p < spec.per_cluster; ++p) {
            for (std::size_t j = 0; j < d; ++j) x[j] = rng.normal(center[j], spec.noise_std);
            ds.features.append_row(x);
            double y = center_value;
            if (spec.target_fn == TargetFn::SumOfFeatures) y = std::accumulate(x.begin(), x.end(), 0.0);
            ds.targets.push_back(y);
            ds.row_ids.push_back("b" + std::to_string(c) + "_" + std::to_string(p));
            out.true_labels.push_back(static_cast<int>(c));
        }
    }
    return out;
}

} // namespace cmlp
