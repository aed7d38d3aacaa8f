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

// Reference re-timing methods.
//
// The per-frame speed-up baseline is a reconstruction: it optimizes one
// speed-up factor per source frame (hinge against slowness at that fixed
// frame, a penalty pulling the mean factor to a target, and smoothness),
// then integrates the factors into a sub-sampling. Because only the mean
// factor is controlled, the number of emitted frames depends on how the
// speed-up is distributed in time.

#pragma once

#include "retime/errors.hpp"
#include "retime/metrics.hpp"
#include "retime/optimizer.hpp"
#include "retime/signals.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace retime {

inline std::vector<double> uniform_retime(std::int64_t n, std::int64_t l)
{
    detail::check_target(n, l);
    return std::vector<double>(static_cast<std::size_t>(l),
                               static_cast<double>(n) / static_cast<double>(l));
}

struct SpeedupConfig {
    double lambda_avg = 10.0;
    double lambda_smooth = 1.0;
    AdamSettings adam;
};

/// Walk t_0 = 0, t_{s+1} = t_s + u[round(t_s)] while t < n and return the
/// differences between consecutive emitted positions.
inline std::vector<double> integrate_speedup(std::span<const double> u, std::int64_t n)
{
    std::vector<double> skips;
    if (u.empty()) {
        return skips;
    }
    const double end = static_cast<double>(n);
    double t = 0.0;
    while (true) {
        const auto idx = std::clamp<std::int64_t>(std::llround(t), 0,
                                                  static_cast<std::int64_t>(u.size()) - 1);
        const double step = std::max(u[static_cast<std::size_t>(idx)], kSkipFloor);
        if (t + step >= end) {
            break;
        }
        skips.push_back(step);
        t += step;
    }
    return skips;
}

/// Per-source-frame speed-up field u (length n) fitted to the slowness of
/// each frame and to a target mean speed-up.
inline std::vector<double> fit_speedup_field(const SlownessMatrix& p, std::int64_t n,
                                             double target_speedup, const SpeedupConfig& cfg)
{
    if (!(target_speedup >= 1.0)) {
        throw InvalidInput("target speed-up must be >= 1");
    }
    if (n < 2) {
        throw InvalidInput("speed-up field needs at least 2 source frames");
    }
    const auto m = static_cast<std::size_t>(n);
    const SlownessMatrix q = p.rows() == m ? p : interpolate_rows(p, m);
    const std::size_t c = q.classes();
    std::vector<double> allowed(c);
    for (std::size_t j = 0; j < c; ++j) {
        allowed[j] = allowed_skip(q.k(), static_cast<int>(j));
    }

    std::vector<double> u(m, target_speedup);
    std::vector<double> mom(m, 0.0);
    std::vector<double> vel(m, 0.0);
    std::vector<double> grad(m);
    const AdamSettings& adam = cfg.adam;
    double b1t = 1.0;
    double b2t = 1.0;
    for (int step = 0; step < adam.steps; ++step) {
        const double mean = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(m);
        const double mean_grad = 2.0 * cfg.lambda_avg * (mean - target_speedup) /
                                 static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            double g = mean_grad;
            for (std::size_t j = 0; j < c; ++j) {
                const double h = u[i] - allowed[j];
                if (h > 0.0) {
                    g += 2.0 * q(i, j) * h;
                }
            }
            if (i > 0) {
                g += 2.0 * cfg.lambda_smooth * (u[i] - u[i - 1]);
            }
            if (i + 1 < m) {
                g -= 2.0 * cfg.lambda_smooth * (u[i + 1] - u[i]);
            }
            grad[i] = g;
        }
        b1t *= adam.beta1;
        b2t *= adam.beta2;
        for (std::size_t i = 0; i < m; ++i) {
            mom[i] = adam.beta1 * mom[i] + (1.0 - adam.beta1) * grad[i];
            vel[i] = adam.beta2 * vel[i] + (1.0 - adam.beta2) * grad[i] * grad[i];
            const double mhat = mom[i] / (1.0 - b1t);
            const double vhat = vel[i] / (1.0 - b2t);
            u[i] = std::max(u[i] - adam.learning_rate * mhat / (std::sqrt(vhat) + adam.epsilon),
                            kSkipFloor);
        }
    }
    return u;
}

inline std::vector<double> speednet_retime(const SlownessMatrix& p, std::int64_t n,
                                           double target_speedup, const SpeedupConfig& cfg = {})
{
    return integrate_speedup(fit_speedup_field(p, n, target_speedup, cfg), n);
}

/// Truncate, or pad with the final skip, to exactly `l` entries.
inline std::vector<double> fit_length(std::vector<double> skips, std::int64_t l, double fallback)
{
    const auto len = static_cast<std::size_t>(l);
    const double pad = skips.empty() ? fallback : skips.back();
    skips.resize(len, pad);
    return skips;
}

/// Targets (n / l) * 1.05^t for t = 0..10.
inline std::vector<double> sweep_targets(std::int64_t n, std::int64_t l, int count = 11)
{
    std::vector<double> out(static_cast<std::size_t>(count));
    const double base = static_cast<double>(n) / static_cast<double>(l);
    for (int t = 0; t < count; ++t) {
        out[static_cast<std::size_t>(t)] = base * std::pow(1.05, t);
    }
    return out;
}

struct SweepResult {
    std::vector<double> targets;         // each target as it was evaluated
    std::vector<double> candidate_mae;   // per target
    std::vector<std::size_t> emitted;    // skips produced by each walk, before length fitting
    std::size_t best = 0;
    std::vector<double> skips;           // best candidate, length l
};

/// Oracle-selected sweep: run the per-frame baseline for every target and
/// keep the candidate closest to the ground truth. Evaluation only.
inline SweepResult speednet_sweep(const SlownessMatrix& p, std::int64_t n, std::int64_t l,
                                  std::span<const double> ground_truth,
                                  const SpeedupConfig& cfg = {})
{
    detail::check_target(n, l);
    if (ground_truth.size() != static_cast<std::size_t>(l)) {
        throw InvalidInput("ground truth must have l entries");
    }
    SweepResult r;
    double best_mae = std::numeric_limits<double>::infinity();
    const double fallback = static_cast<double>(n) / static_cast<double>(l);
    for (double target : sweep_targets(n, l)) {
        std::vector<double> raw = speednet_retime(p, n, target, cfg);
        r.targets.push_back(target);
        r.emitted.push_back(raw.size());
        std::vector<double> cand = fit_length(std::move(raw), l, fallback);
        const double e = mae(cand, ground_truth);
        r.candidate_mae.push_back(e);
        if (e < best_mae) {
            best_mae = e;
            r.best = r.targets.size() - 1;
            r.skips = std::move(cand);
        }
    }
    return r;
}

} // namespace retime
