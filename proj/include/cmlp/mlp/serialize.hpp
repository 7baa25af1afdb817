#pragma once

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cmlp/core/error.hpp"
#include "cmlp/mlp/model.hpp"

namespace cmlp {

// Model file layout (text, one record per line):
//
//   cmlp-model 1
//   spec <d> <k> 1
//   w1 <k*d values, row-major>
//   b1 <k values>
//   w2 <k values>
//   b2 <value>
//   center <d values>
//   scale <d values>
//   target <center> <scale>
//   end
//
// Values are written with 17 significant digits, so load(save(m)) == m bit for bit.

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline void write_values(std::ostream& out, const char* tag, std::span<const double> v) {
    out << tag;
    for (double x : v) out << ' ' << x;
    out << '\n';
}

class RecordReader {
  public:
    explicit RecordReader(std::istream& in) : in_(in) {}

    std::vector<std::string> next(const std::string& expected_tag) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) break;
        }
        std::istringstream ss(line);
        std::vector<std::string> tokens;
        for (std::string t; ss >> t;) tokens.push_back(t);
        if (tokens.empty() || tokens[0] != expected_tag)
            fail("expected record '" + expected_tag + "'");
        tokens.erase(tokens.begin());
        return tokens;
    }

    std::vector<double> reals(const std::string& tag, std::size_t count) {
        const auto tokens = next(tag);
        if (tokens.size() != count)
            fail("record '" + tag + "' has " + std::to_string(tokens.size()) + " values, expected " +
                 std::to_string(count));
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            const auto& t = tokens[i];
            const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out[i]);
            if (ec != std::errc() || ptr != t.data() + t.size()) fail("bad number '" + t + "'");
        }
        return out;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError("model file line " + std::to_string(line_no_) + ": " + what);
    }

  private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

inline std::size_t parse_size(const RecordReader& rr, const std::string& t) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || v == 0) rr.fail("bad width '" + t + "'");
    return v;
}

} // namespace detail

inline void save_model(std::ostream& out, const MlpModel& m) {
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << std::setprecision(17);
    out << "cmlp-model " << kModelFormatVersion << '\n';
    out << "spec " << m.spec.input_width << ' ' << m.spec.hidden_width << ' ' << NetworkSpec::output_width << '\n';
    detail::write_values(out, "w1", m.w1);
    detail::write_values(out, "b1", m.b1);
    detail::write_values(out, "w2", m.w2);
    const double b2[] = {m.b2};
    detail::write_values(out, "b2", b2);
    detail::write_values(out, "center", m.norm.center);
    detail::write_values(out, "scale", m.norm.scale);
    const double target[] = {m.norm.target_center, m.norm.target_scale};
    detail::write_values(out, "target", target);
    out << "end\n";
    out.flags(flags);
    out.precision(prec);
}

inline MlpModel load_model(std::istream& in) {
    detail::RecordReader rr(in);
    const auto header = rr.next("cmlp-model");
    if (header.size() != 1 || header[0] != std::to_string(kModelFormatVersion))
        rr.fail("unsupported model format version");
    const auto spec = rr.next("spec");
    if (spec.size() != 3 || spec[2] != "1") rr.fail("spec must read '<d> <k> 1'");

    MlpModel m;
    m.spec.input_width = detail::parse_size(rr, spec[0]);
    m.spec.hidden_width = detail::parse_size(rr, spec[1]);
    const std::size_t d = m.spec.input_width;
    const std::size_t k = m.spec.hidden_width;
    m.w1 = rr.reals("w1", k * d);
    m.b1 = rr.reals("b1", k);
    m.w2 = rr.reals("w2", k);
    m.b2 = rr.reals("b2", 1)[0];
    m.norm.center = rr.reals("center", d);
    m.norm.scale = rr.reals("scale", d);
    const auto target = rr.reals("target", 2);
    m.norm.target_center = target[0];
    m.norm.target_scale = target[1];
    rr.next("end");
    for (double s : m.norm.scale)
        if (!(s > 0.0)) rr.fail("normalization scales must be positive");
    if (!(m.norm.target_scale > 0.0)) rr.fail("target scale must be positive");
    return m;
}

inline void save_model(const std::string& path, const MlpModel& m) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model to '" + path + "'");
    save_model(out, m);
}

inline MlpModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model '" + path + "'");
    return load_model(in);
}

} // namespace cmlp
