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

// Re-timing accuracy experiment on synthetic ground truth: every method
// re-times the same cases and is scored by the mean absolute error of its
// skip sequence.

#pragma once

#include "retime/baselines.hpp"
#include "retime/errors.hpp"
#include "retime/metrics.hpp"
#include "retime/optimizer.hpp"
#include "retime/random.hpp"
#include "retime/synth.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace retime {

enum class Method { Ours, Speednet, Uniform };

inline constexpr std::string_view method_name(Method m)
{
    switch (m) {
    case Method::Ours: return "ours";
    case Method::Speednet: return "speednet";
    case Method::Uniform: return "uniform";
    }
    return "unknown";
}

inline Method parse_method(std::string_view s)
{
    if (s == "ours") return Method::Ours;
    if (s == "speednet") return Method::Speednet;
    if (s == "uniform") return Method::Uniform;
    throw InvalidInput("unknown method '" + std::string(s) + "' (expected ours, speednet, uniform)");
}

/// Relative duration tolerance: |sum d - n| <= 0.01 n.
inline constexpr double kDurationTolerance = 0.01;

struct SuiteConfig {
    std::vector<double> durations{20.0, 60.0, 180.0};
    int cases_per_duration = 50;
    int fps = 30;
    int k = 2;
    std::vector<Method> methods{Method::Ours, Method::Speednet, Method::Uniform};
    std::uint64_t seed = 1;
    std::optional<double> sigma;  // empty: drawn per case
    unsigned threads = 0;         // 0: hardware concurrency
    RetimeConfig retime;
    SpeedupConfig speedup;
};

struct CaseRecord {
    Method method = Method::Ours;
    double duration_s = 0.0;
    std::size_t case_index = 0;
    std::uint64_t seed = 0;
    std::int64_t n = 0;
    std::int64_t l = 0;
    double mae = 0.0;
    double duration_error = 0.0;  // |sum d - n|
    bool within_duration_bound = true;
    double wall_ms = 0.0;
    std::optional<double> best_target;  // speednet sweep only
};

struct MethodSummary {
    Method method = Method::Ours;
    double duration_s = 0.0;
    std::size_t cases = 0;
    double mean_mae = 0.0;
    double duration_violation_fraction = 0.0;
    double mean_wall_ms = 0.0;
};

struct ExperimentReport {
    SuiteConfig config;
    std::vector<CaseRecord> cases;
    std::vector<MethodSummary> summary;

    const MethodSummary* find(Method m, double duration_s) const
    {
        for (const auto& s : summary) {
            if (s.method == m && s.duration_s == duration_s) {
                return &s;
            }
        }
        return nullptr;
    }
};

/// Seed of case `index` within duration group `group`; independent of the
/// order in which cases are run.
inline std::uint64_t case_seed(std::uint64_t suite_seed, std::size_t group, std::size_t index)
{
    return mix_seed(mix_seed(suite_seed, group), index);
}

/// Case `index` of duration group `group`. Draws that leave nothing to
/// re-time (every skip 1, so l == n) are replaced by a redraw from a derived
/// seed.
inline GroundTruthCase make_suite_case(const SuiteConfig& cfg, std::size_t group,
                                       std::size_t index)
{
    std::uint64_t seed = case_seed(cfg.seed, group, index);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        GroundTruthCase gc = make_duration_case(cfg.durations[group], cfg.fps, cfg.k, seed, cfg.sigma);
        if (gc.l < gc.n) {
            return gc;
        }
        seed = mix_seed(seed, static_cast<std::uint64_t>(attempt));
    }
    throw InvalidInput("could not draw a case with any speed-up; check sigma and duration");
}

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
        .count();
}

} // namespace detail

/// Run every configured method on one case.
inline std::vector<CaseRecord> evaluate_case(const GroundTruthCase& gc, double duration_s,
                                             std::size_t case_index, const SuiteConfig& cfg)
{
    const std::vector<double> truth(gc.skips.begin(), gc.skips.end());
    std::vector<CaseRecord> out;
    for (Method m : cfg.methods) {
        CaseRecord rec;
        rec.method = m;
        rec.duration_s = duration_s;
        rec.case_index = case_index;
        rec.seed = gc.seed;
        rec.n = gc.n;
        rec.l = gc.l;
        const auto start = std::chrono::steady_clock::now();
        std::vector<double> skips;
        switch (m) {
        case Method::Ours:
            skips = optimize(gc.slowness, gc.n, gc.l, cfg.retime).d_hat;
            break;
        case Method::Speednet: {
            SweepResult sweep = speednet_sweep(gc.slowness, gc.n, gc.l, truth, cfg.speedup);
            rec.best_target = sweep.targets[sweep.best];
            skips = std::move(sweep.skips);
            break;
        }
        case Method::Uniform:
            skips = uniform_retime(gc.n, gc.l);
            break;
        }
        rec.wall_ms = detail::elapsed_ms(start);
        rec.mae = mae(skips, truth);
        rec.duration_error =
            std::abs(std::accumulate(skips.begin(), skips.end(), 0.0) - static_cast<double>(gc.n));
        rec.within_duration_bound =
            rec.duration_error <= kDurationTolerance * static_cast<double>(gc.n);
        out.push_back(rec);
    }
    return out;
}

inline std::vector<MethodSummary> summarize(const std::vector<CaseRecord>& cases,
                                            const SuiteConfig& cfg)
{
    std::vector<MethodSummary> out;
    for (double dur : cfg.durations) {
        for (Method m : cfg.methods) {
            MethodSummary s;
            s.method = m;
            s.duration_s = dur;
            std::size_t violations = 0;
            for (const auto& c : cases) {
                if (c.method != m || c.duration_s != dur) {
                    continue;
                }
                ++s.cases;
                s.mean_mae += c.mae;
                s.mean_wall_ms += c.wall_ms;
                violations += c.within_duration_bound ? 0 : 1;
            }
            if (s.cases > 0) {
                const auto count = static_cast<double>(s.cases);
                s.mean_mae /= count;
                s.mean_wall_ms /= count;
                s.duration_violation_fraction = static_cast<double>(violations) / count;
            }
            out.push_back(s);
        }
    }
    return out;
}

namespace detail {

// Runs job(i) for i in [0, count) on `threads` workers. Results are stored
// by index, so the outcome does not depend on scheduling.
template <typename Job>
void parallel_for(std::size_t count, unsigned threads, Job job)
{
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = count;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace detail

inline ExperimentReport run_suite(const SuiteConfig& cfg)
{
    if (cfg.durations.empty()) {
        throw InvalidInput("suite needs at least one duration");
    }
    if (cfg.cases_per_duration < 1) {
        throw InvalidInput("suite needs at least one case per duration");
    }
    if (cfg.methods.empty()) {
        throw InvalidInput("suite needs at least one method");
    }
    const auto per = static_cast<std::size_t>(cfg.cases_per_duration);
    const std::size_t jobs = cfg.durations.size() * per;
    std::vector<std::vector<CaseRecord>> results(jobs);
    detail::parallel_for(jobs, cfg.threads, [&](std::size_t i) {
        const std::size_t g = i / per;
        const std::size_t c = i % per;
        results[i] = evaluate_case(make_suite_case(cfg, g, c), cfg.durations[g], c, cfg);
    });
    ExperimentReport report;
    report.config = cfg;
    for (auto& recs : results) {
        report.cases.insert(report.cases.end(), recs.begin(), recs.end());
    }
    report.summary = summarize(report.cases, cfg);
    return report;
}

/// Evaluate pre-generated cases (e.g. loaded from case files). Each case is
/// grouped under its own source length expressed in seconds at cfg.fps.
inline ExperimentReport run_cases(const std::vector<GroundTruthCase>& cases, SuiteConfig cfg)
{
    if (cases.empty()) {
        throw InvalidInput("no cases to evaluate");
    }
    cfg.durations.clear();
    std::vector<double> dur(cases.size());
    for (std::size_t c = 0; c < cases.size(); ++c) {
        dur[c] = static_cast<double>(cases[c].n) / static_cast<double>(cfg.fps);
        if (std::find(cfg.durations.begin(), cfg.durations.end(), dur[c]) == cfg.durations.end()) {
            cfg.durations.push_back(dur[c]);
        }
    }
    std::vector<std::vector<CaseRecord>> results(cases.size());
    detail::parallel_for(cases.size(), cfg.threads, [&](std::size_t c) {
        results[c] = evaluate_case(cases[c], dur[c], c, cfg);
    });
    ExperimentReport report;
    for (auto& recs : results) {
        report.cases.insert(report.cases.end(), recs.begin(), recs.end());
    }
    cfg.cases_per_duration = 0;
    report.config = cfg;
    report.summary = summarize(report.cases, cfg);
    return report;
}

} // namespace retime
