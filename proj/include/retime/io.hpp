// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

// Text file formats.
//
//   slowness CSV   "# slowness k=<k>" then one row of k+1 floats per position
//   slowness JSON  {"k": int, "probs": [[...], ...]}
//   signal CSV     optional "# orientation=<zero_slow|one_slow>", one float per line
//   features CSV   one fixed-width row of floats per frame
//   case JSON      {"seed", "k", "skips", "labels", "n", "l"}
//   result JSON    {"d", "nu", "frame_indices", "duration_error", "loss_trace", ...}
//   report JSON    suite config, per-method summary, per-case records

#pragma once

#include "retime/errors.hpp"
#include "retime/eval.hpp"
#include "retime/optimizer.hpp"
#include "retime/signals.hpp"
#include "retime/synth.hpp"

#include <json.hpp>

#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace retime::io {

using nlohmann::json;

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

inline double parse_double(std::string_view s, const std::string& where)
{
    s = trim(s);
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw InvalidInput(where + ": cannot parse number '" + std::string(s) + "'");
    }
    return v;
}

inline std::vector<double> parse_row(std::string_view line, const std::string& where)
{
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        row.push_back(parse_double(line.substr(start, comma - start), where));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return row;
}

inline std::string format_double(double v)
{
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidInput("cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidInput("cannot write '" + path + "'");
    }
    out << text;
}

struct Line {
    std::size_t number;
    std::string_view text;
};

// Non-empty lines, trimmed.
inline std::vector<Line> lines_of(std::string_view text)
{
    std::vector<Line> out;
    std::size_t start = 0;
    std::size_t number = 1;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        const auto t = trim(text.substr(start, end - start));
        if (!t.empty()) {
            out.push_back({number, t});
        }
        start = end + 1;
        ++number;
    }
    return out;
}

inline json parse_json(const std::string& text, const std::string& where)
{
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidInput(where + ": malformed JSON (" + e.what() + ")");
    }
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& where)
{
    if (!j.is_object() || !j.contains(key)) {
        throw InvalidInput(where + ": missing field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidInput(where + ": field '" + key + "' has the wrong type");
    }
}

} // namespace detail

// ---------------------------------------------------------------- slowness

inline SlownessMatrix parse_slowness_csv(std::string_view text, const std::string& where)
{
    std::optional<int> k;
    std::vector<std::vector<double>> rows;
    for (const auto& line : detail::lines_of(text)) {
        const std::string at = where + ":" + std::to_string(line.number);
        if (line.text.front() == '#') {
            const auto pos = line.text.find("k=");
            if (line.text.find("slowness") != std::string_view::npos && pos != std::string_view::npos) {
                k = static_cast<int>(detail::parse_double(line.text.substr(pos + 2), at));
            }
            continue;
        }
        rows.push_back(detail::parse_row(line.text, at));
    }
    if (rows.empty()) {
        throw InvalidInput(where + ": no slowness rows");
    }
    const int kk = k ? *k : static_cast<int>(rows.front().size()) - 1;
    return SlownessMatrix::from_rows(kk, rows);
}

inline SlownessMatrix parse_slowness_json(const std::string& text, const std::string& where)
{
    const json j = detail::parse_json(text, where);
    const int k = detail::get_field<int>(j, "k", where);
    const auto probs = detail::get_field<std::vector<std::vector<double>>>(j, "probs", where);
    if (probs.empty()) {
        throw InvalidInput(where + ": no slowness rows");
    }
    return SlownessMatrix::from_rows(k, probs);
}

/// CSV or JSON, detected from the first non-blank character.
inline SlownessMatrix read_slowness(const std::string& path)
{
    const std::string text = detail::slurp(path);
    const auto body = detail::trim(text);
    if (!body.empty() && body.front() == '{') {
        return parse_slowness_json(text, path);
    }
    return parse_slowness_csv(text, path);
}

inline std::string format_slowness_csv(const SlownessMatrix& p)
{
    std::string out = "# slowness k=" + std::to_string(p.k()) + "\n";
    for (std::size_t r = 0; r < p.rows(); ++r) {
        for (std::size_t j = 0; j < p.classes(); ++j) {
            if (j > 0) {
                out += ',';
            }
            out += detail::format_double(p(r, j));
        }
        out += '\n';
    }
    return out;
}

inline void write_slowness_csv(const std::string& path, const SlownessMatrix& p)
{
    detail::write_text(path, format_slowness_csv(p));
}

// ---------------------------------------------------------------- signal

inline std::string_view orientation_tag(Orientation o)
{
    return o == Orientation::ZeroMeansNoSpeedup ? "zero_slow" : "one_slow";
}

struct SignalFile {
    std::vector<double> values;
    Orientation orientation = Orientation::ZeroMeansNoSpeedup;
};

inline SignalFile parse_signal_csv(std::string_view text, const std::string& where)
{
    SignalFile f;
    for (const auto& line : detail::lines_of(text)) {
        const std::string at = where + ":" + std::to_string(line.number);
        if (line.text.front() == '#') {
            const auto pos = line.text.find("orientation=");
            if (pos != std::string_view::npos) {
                const auto tag = detail::trim(line.text.substr(pos + 12));
                if (tag == "zero_slow") {
                    f.orientation = Orientation::ZeroMeansNoSpeedup;
                } else if (tag == "one_slow") {
                    f.orientation = Orientation::OneMeansNoSpeedup;
                } else {
                    throw InvalidInput(at + ": unknown orientation '" + std::string(tag) + "'");
                }
            }
            continue;
        }
        f.values.push_back(detail::parse_double(line.text, at));
    }
    return f;
}

inline SignalFile read_signal(const std::string& path)
{
    return parse_signal_csv(detail::slurp(path), path);
}

/// Writes the normalized values, re-expressed so 0 means no speed-up.
inline std::string format_signal_csv(const RetimeSignal& s)
{
    std::string out = "# orientation=zero_slow\n";
    for (double v : s.speedup_weights()) {
        out += detail::format_double(v);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------- features

inline std::vector<std::vector<double>> parse_features_csv(std::string_view text,
                                                           const std::string& where)
{
    std::vector<std::vector<double>> rows;
    for (const auto& line : detail::lines_of(text)) {
        if (line.text.front() == '#') {
            continue;
        }
        rows.push_back(detail::parse_row(line.text, where + ":" + std::to_string(line.number)));
        if (rows.back().size() != rows.front().size()) {
            throw InvalidInput(where + ":" + std::to_string(line.number) +
                               ": feature row width differs from the first row");
        }
    }
    return rows;
}

inline std::vector<std::vector<double>> read_features(const std::string& path)
{
    return parse_features_csv(detail::slurp(path), path);
}

// ---------------------------------------------------------------- case

inline json case_to_json(const GroundTruthCase& c)
{
    return json{{"seed", c.seed}, {"k", c.k},   {"skips", c.skips},
                {"labels", c.labels}, {"n", c.n}, {"l", c.l}};
}

inline GroundTruthCase case_from_json(const json& j, const std::string& where)
{
    const auto seed = detail::get_field<std::uint64_t>(j, "seed", where);
    const int k = detail::get_field<int>(j, "k", where);
    auto skips = detail::get_field<std::vector<int>>(j, "skips", where);
    GroundTruthCase c = case_from_skips(std::move(skips), k, seed);
    if (j.contains("n") && detail::get_field<std::int64_t>(j, "n", where) != c.n) {
        throw InvalidInput(where + ": n does not equal the sum of skips");
    }
    if (j.contains("l") && detail::get_field<std::int64_t>(j, "l", where) != c.l) {
        throw InvalidInput(where + ": l does not equal the number of skips");
    }
    if (j.contains("labels") && detail::get_field<std::vector<int>>(j, "labels", where) != c.labels) {
        throw InvalidInput(where + ": labels are not log2 of the skips");
    }
    return c;
}

inline GroundTruthCase read_case(const std::string& path)
{
    return case_from_json(detail::parse_json(detail::slurp(path), path), path);
}

// ---------------------------------------------------------------- result

inline json result_to_json(const RetimeResult& r)
{
    json j{{"d", r.d_hat},
           {"nu", r.nu},
           {"frame_indices", r.frame_indices},
           {"duration_error", r.duration_error},
           {"loss_trace", r.loss_trace},
           {"terms",
            {{"guidance", r.terms.guidance},
             {"sum", r.terms.sum},
             {"min", r.terms.min},
             {"smooth", r.terms.smooth},
             {"total", r.terms.total}}}};
    return j;
}

// ---------------------------------------------------------------- report

inline json suite_config_to_json(const SuiteConfig& c)
{
    json methods = json::array();
    for (Method m : c.methods) {
        methods.push_back(std::string(method_name(m)));
    }
    json j{{"durations", c.durations},
           {"cases_per_duration", c.cases_per_duration},
           {"fps", c.fps},
           {"k", c.k},
           {"methods", methods},
           {"seed", c.seed},
           {"retime",
            {{"lambda_sum", c.retime.lambda_sum},
             {"lambda_min", c.retime.lambda_min},
             {"lambda_smooth", c.retime.lambda_smooth},
             {"learning_rate", c.retime.adam.learning_rate},
             {"steps", c.retime.adam.steps},
             {"index_gradient",
              c.retime.index_gradient == IndexGradient::Full ? "full" : "stop"}}},
           {"speedup",
            {{"lambda_avg", c.speedup.lambda_avg},
             {"lambda_smooth", c.speedup.lambda_smooth},
             {"learning_rate", c.speedup.adam.learning_rate},
             {"steps", c.speedup.adam.steps}}}};
    j["sigma"] = c.sigma ? json(*c.sigma) : json(nullptr);
    return j;
}

/// Suite parameters from JSON; keys not listed here are rejected.
inline SuiteConfig suite_config_from_json(const json& j, SuiteConfig base,
                                          const std::string& where)
{
    if (!j.is_object()) {
        throw InvalidInput(where + ": suite config must be a JSON object");
    }
    static const std::vector<std::string> known{"durations", "cases_per_duration", "fps", "k",
                                                "methods",   "seed",               "sigma"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw InvalidInput(where + ": unknown suite config key '" + key + "'");
        }
    }
    if (j.contains("durations")) base.durations = detail::get_field<std::vector<double>>(j, "durations", where);
    if (j.contains("cases_per_duration")) base.cases_per_duration = detail::get_field<int>(j, "cases_per_duration", where);
    if (j.contains("fps")) base.fps = detail::get_field<int>(j, "fps", where);
    if (j.contains("k")) base.k = detail::get_field<int>(j, "k", where);
    if (j.contains("seed")) base.seed = detail::get_field<std::uint64_t>(j, "seed", where);
    if (j.contains("sigma") && !j.at("sigma").is_null()) base.sigma = detail::get_field<double>(j, "sigma", where);
    if (j.contains("methods")) {
        base.methods.clear();
        for (const auto& m : detail::get_field<std::vector<std::string>>(j, "methods", where)) {
            base.methods.push_back(parse_method(m));
        }
    }
    return base;
}

inline json report_to_json(const ExperimentReport& r)
{
    json summary = json::array();
    for (const auto& s : r.summary) {
        summary.push_back({{"method", std::string(method_name(s.method))},
                           {"duration_s", s.duration_s},
                           {"cases", s.cases},
                           {"mae", s.mean_mae},
                           {"duration_violation_fraction", s.duration_violation_fraction},
                           {"mean_wall_ms", s.mean_wall_ms}});
    }
    json cases = json::array();
    for (const auto& c : r.cases) {
        json jc{{"method", std::string(method_name(c.method))},
                {"duration_s", c.duration_s},
                {"case", c.case_index},
                {"seed", c.seed},
                {"n", c.n},
                {"l", c.l},
                {"mae", c.mae},
                {"duration_error", c.duration_error},
                {"within_duration_bound", c.within_duration_bound},
                {"wall_ms", c.wall_ms}};
        if (c.best_target) {
            jc["best_target"] = *c.best_target;
        }
        cases.push_back(std::move(jc));
    }
    return json{{"config", suite_config_to_json(r.config)},
                {"duration_tolerance", kDurationTolerance},
                {"summary", summary},
                {"cases", cases}};
}

/// method x duration -> MAE table.
inline std::string report_summary_csv(const ExperimentReport& r)
{
    std::string out = "method,duration_s,cases,mae,duration_violation_fraction,mean_wall_ms\n";
    for (const auto& s : r.summary) {
        out += std::string(method_name(s.method)) + "," + detail::format_double(s.duration_s) + "," +
               std::to_string(s.cases) + "," + detail::format_double(s.mean_mae) + "," +
               detail::format_double(s.duration_violation_fraction) + "," +
               detail::format_double(s.mean_wall_ms) + "\n";
    }
    return out;
}

} // namespace retime::io
