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

// Subcommands of the `retime` tool. Exit codes: 0 success, 2 input error,
// 3 infeasible target (l >= n).

#pragma once

#include "retime/retime.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace retime::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInfeasible = 3;

struct RetimeFlags {
    std::string slowness;
    std::string signal;
    std::string mode = "slowness";
    std::int64_t source_frames = 0;
    std::int64_t target_frames = 0;
    std::string lambda = "auto";
    std::string output = "-";
};

struct SynthFlags {
    double seconds = 20.0;
    int fps = 30;
    std::uint64_t seed = 1;
    std::optional<double> sigma;
    int k = 2;
    std::string case_out = "case.json";
    std::string slowness_out = "slowness.csv";
};

struct EvalFlags {
    std::string config;
    std::vector<std::string> cases;
    std::vector<std::string> methods;
    std::vector<double> durations;
    std::optional<int> cases_per_duration;
    std::optional<int> fps;
    std::optional<int> k;
    std::optional<std::uint64_t> seed;
    std::optional<double> sigma;
    std::string output = "report.json";
    std::string summary = "report.csv";
};

struct SignalFlags {
    std::string features;
    std::string slowness;
    std::string type;
    std::string output = "-";
};

namespace detail {

inline void emit(const std::string& path, const std::string& text, std::ostream& out)
{
    if (path == "-") {
        out << text;
    } else {
        io::detail::write_text(path, text);
    }
}

inline void add_adam_flags(CLI::App* cmd, AdamSettings& a, const std::string& prefix)
{
    cmd->add_option("--" + prefix + "lr", a.learning_rate, "Adam learning rate")
        ->capture_default_str();
    cmd->add_option("--" + prefix + "steps", a.steps, "Adam iterations")->capture_default_str();
    cmd->add_option("--" + prefix + "beta1", a.beta1, "Adam first-moment decay")
        ->capture_default_str();
    cmd->add_option("--" + prefix + "beta2", a.beta2, "Adam second-moment decay")
        ->capture_default_str();
    cmd->add_option("--" + prefix + "eps", a.epsilon, "Adam denominator epsilon")
        ->capture_default_str();
}

inline void add_retime_flags(CLI::App* cmd, RetimeConfig& c, std::string& index_gradient)
{
    cmd->add_option("--lambda-sum", c.lambda_sum, "weight of the duration penalty")
        ->capture_default_str();
    cmd->add_option("--lambda-min", c.lambda_min, "weight of the minimum-skip penalty")
        ->capture_default_str();
    cmd->add_option("--lambda-smooth", c.lambda_smooth, "weight of the smoothness penalty")
        ->capture_default_str();
    cmd->add_option("--gap-threshold", c.gap_threshold,
                    "sharpen slowness until max - min exceeds this")
        ->capture_default_str();
    cmd->add_option("--index-gradient", index_gradient,
                    "differentiate through sampling positions (full) or not (stop)")
        ->check(CLI::IsMember({"stop", "full"}))
        ->capture_default_str();
    add_adam_flags(cmd, c.adam, "");
}

inline IndexGradient parse_index_gradient(const std::string& s)
{
    return s == "full" ? IndexGradient::Full : IndexGradient::Stop;
}

} // namespace detail

inline int cmd_retime(const RetimeFlags& f, RetimeConfig cfg, std::ostream& out)
{
    RetimeResult r;
    io::json meta;
    if (f.mode == "signal") {
        if (f.signal.empty()) {
            throw InvalidInput("--mode signal needs --signal <file>");
        }
        const io::SignalFile sf = io::read_signal(f.signal);
        const RetimeSignal s = normalize_signal(sf.values, sf.orientation);
        const std::int64_t n = f.source_frames > 0 ? f.source_frames
                                                   : static_cast<std::int64_t>(sf.values.size());
        if (f.lambda != "auto") {
            cfg.lambda_signal = io::detail::parse_double(f.lambda, "--lambda");
        }
        r = optimize(s, n, f.target_frames, cfg);
        meta = {{"mode", "signal"}, {"n", n}, {"l", f.target_frames}, {"lambda", *r.lambda_signal},
                {"lambda_source", f.lambda == "auto" ? "auto" : "user"},
                {"orientation", std::string(io::orientation_tag(sf.orientation))},
                {"degenerate", s.degenerate}};
    } else {
        if (f.slowness.empty()) {
            throw InvalidInput("--mode slowness needs --slowness <file>");
        }
        const SlownessMatrix p = io::read_slowness(f.slowness);
        const std::int64_t n =
            f.source_frames > 0 ? f.source_frames : static_cast<std::int64_t>(p.rows());
        r = optimize(p, n, f.target_frames, cfg);
        meta = {{"mode", "slowness"}, {"n", n}, {"l", f.target_frames}, {"lambda", nullptr}};
    }
    io::json j = io::result_to_json(r);
    j["metadata"] = meta;
    detail::emit(f.output, j.dump(2) + "\n", out);
    return kExitOk;
}

inline int cmd_synth(const SynthFlags& f, std::ostream& out)
{
    const GroundTruthCase c = make_duration_case(f.seconds, f.fps, f.k, f.seed, f.sigma);
    detail::emit(f.case_out, io::case_to_json(c).dump(2) + "\n", out);
    detail::emit(f.slowness_out, io::format_slowness_csv(c.slowness), out);
    return kExitOk;
}

inline int cmd_eval(const EvalFlags& f, SuiteConfig cfg, std::ostream& out)
{
    if (!f.config.empty()) {
        cfg = io::suite_config_from_json(
            io::detail::parse_json(io::detail::slurp(f.config), f.config), cfg, f.config);
    }
    if (!f.durations.empty()) cfg.durations = f.durations;
    if (f.cases_per_duration) cfg.cases_per_duration = *f.cases_per_duration;
    if (f.fps) cfg.fps = *f.fps;
    if (f.k) cfg.k = *f.k;
    if (f.seed) cfg.seed = *f.seed;
    if (f.sigma) cfg.sigma = *f.sigma;
    if (!f.methods.empty()) {
        cfg.methods.clear();
        for (const auto& m : f.methods) {
            cfg.methods.push_back(parse_method(m));
        }
    }
    cfg.retime.validate();

    ExperimentReport report;
    if (!f.cases.empty()) {
        std::vector<GroundTruthCase> cases;
        for (const auto& path : f.cases) {
            cases.push_back(io::read_case(path));
        }
        report = run_cases(cases, cfg);
    } else {
        report = run_suite(cfg);
    }
    detail::emit(f.output, io::report_to_json(report).dump(2) + "\n", out);
    detail::emit(f.summary, io::report_summary_csv(report), out);
    return kExitOk;
}

inline int cmd_signal(const SignalFlags& f, std::ostream& out, std::ostream& err)
{
    RetimeSignal s;
    if (f.type == "cosine") {
        if (f.features.empty()) {
            throw InvalidInput("--type cosine needs --features <file>");
        }
        s = cosine_similarity_signal(io::read_features(f.features));
    } else if (f.type == "speediness") {
        if (f.slowness.empty()) {
            throw InvalidInput("--type speediness needs --slowness <file>");
        }
        s = speediness_to_signal(io::read_slowness(f.slowness));
    } else {
        throw InvalidInput("--type must be cosine or speediness");
    }
    if (s.degenerate) {
        err << "warning: raw signal is constant; normalized output is all zero (no speed-up)\n";
    }
    detail::emit(f.output, io::format_signal_csv(s), out);
    return kExitOk;
}

/// Parse argv and dispatch. Never throws.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr)
{
    CLI::App app{"Re-time a video to a target number of frames."};
    app.require_subcommand(1);

    RetimeFlags rf;
    RetimeConfig rcfg;
    std::string r_index = "stop";
    auto* retime = app.add_subcommand("retime", "compute a frame sub-sampling of length l");
    retime->add_option("--slowness", rf.slowness, "slowness CSV or JSON (mode slowness)");
    retime->add_option("--signal", rf.signal, "re-timing signal CSV (mode signal)");
    retime->add_option("--mode", rf.mode, "guidance type")
        ->check(CLI::IsMember({"slowness", "signal"}))
        ->capture_default_str();
    retime->add_option("--source-frames", rf.source_frames,
                       "source length n (default: rows of the input file)");
    retime->add_option("--target-frames", rf.target_frames, "target length l")->required();
    retime->add_option("--lambda", rf.lambda, "signal weight: auto = (n/l)/mean(signal), or a number")
        ->capture_default_str();
    retime->add_option("-o,--output", rf.output, "result JSON path, - for stdout")
        ->capture_default_str();
    detail::add_retime_flags(retime, rcfg, r_index);

    SynthFlags sf;
    auto* synth = app.add_subcommand("synth", "generate a synthetic ground-truth case");
    synth->add_option("--duration-seconds", sf.seconds, "clip duration in seconds")
        ->capture_default_str();
    synth->add_option("--fps", sf.fps, "frames per second")->capture_default_str();
    synth->add_option("--seed", sf.seed, "random seed")->capture_default_str();
    synth->add_option("--sigma", sf.sigma, "chain switch probability (default: drawn in [0, 0.1))");
    synth->add_option("--k", sf.k, "largest skip is 2^k")->capture_default_str();
    synth->add_option("--case-out", sf.case_out, "case JSON path")->capture_default_str();
    synth->add_option("--slowness-out", sf.slowness_out, "slowness CSV path")
        ->capture_default_str();

    EvalFlags ef;
    SuiteConfig scfg;
    std::string e_index = "stop";
    auto* eval = app.add_subcommand("eval", "run the re-timing accuracy experiment");
    eval->add_option("--config", ef.config, "suite config JSON; flags below override it");
    eval->add_option("--cases", ef.cases, "case JSON files to evaluate instead of a generated suite");
    eval->add_option("--methods", ef.methods, "subset of ours, speednet, uniform (default: all)")
        ->delimiter(',');
    eval->add_option("--durations", ef.durations, "clip durations in seconds (default: 20,60,180)")
        ->delimiter(',');
    eval->add_option("--cases-per-duration", ef.cases_per_duration, "cases per duration (default: 50)");
    eval->add_option("--fps", ef.fps, "frames per second (default: 30)");
    eval->add_option("--k", ef.k, "largest skip is 2^k (default: 2)");
    eval->add_option("--seed", ef.seed, "suite seed (default: 1)");
    eval->add_option("--sigma", ef.sigma, "fixed chain switch probability (default: drawn per case)");
    eval->add_option("--threads", scfg.threads, "worker threads, 0 = all cores")
        ->capture_default_str();
    eval->add_option("-o,--output", ef.output, "report JSON path")->capture_default_str();
    eval->add_option("--summary", ef.summary, "summary CSV path")->capture_default_str();
    detail::add_retime_flags(eval, scfg.retime, e_index);
    eval->add_option("--speedup-lambda-avg", scfg.speedup.lambda_avg,
                     "per-frame baseline: weight of the mean speed-up penalty")
        ->capture_default_str();
    eval->add_option("--speedup-lambda-smooth", scfg.speedup.lambda_smooth,
                     "per-frame baseline: smoothness weight")
        ->capture_default_str();
    detail::add_adam_flags(eval, scfg.speedup.adam, "speedup-");

    SignalFlags gf;
    auto* signal = app.add_subcommand("signal", "build a normalized re-timing signal");
    signal->add_option("--features", gf.features, "per-frame feature CSV (type cosine)");
    signal->add_option("--slowness", gf.slowness, "slowness CSV or JSON (type speediness)");
    signal->add_option("--type", gf.type, "cosine or speediness")
        ->check(CLI::IsMember({"cosine", "speediness"}))
        ->required();
    signal->add_option("-o,--output", gf.output, "signal CSV path, - for stdout")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitInput;
    }

    try {
        if (*retime) {
            rcfg.index_gradient = detail::parse_index_gradient(r_index);
            return cmd_retime(rf, rcfg, out);
        }
        if (*synth) {
            return cmd_synth(sf, out);
        }
        if (*eval) {
            scfg.retime.index_gradient = detail::parse_index_gradient(e_index);
            return cmd_eval(ef, scfg, out);
        }
        return cmd_signal(gf, out, err);
    } catch (const InvalidTarget& e) {
        err << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }
}

} // namespace retime::cli
