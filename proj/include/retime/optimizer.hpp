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

// Frame-skip optimization for re-timing a video to an exact target length.
//
// The variable is a skip vector d of length l; output frame i sits at source
// position nu_i = d_1 + ... + d_i. The objective
//
//   L = L_guide + w_sum L_sum + w_min L_min + w_smooth L_smooth
//
// combines a duration penalty (sum d - n)^2, a hinge keeping skips >= 1, a
// first-difference smoothness penalty, and a guidance term. The guidance
// term either bounds each skip by the admissible speed-up of the slowness
// classes found at nu_i, or by 1 + lambda * s(nu_i) for a scalar signal s.
// Guidance is sampled at nu_i by linear interpolation, so the gradient has
// a direct part (through the hinge) and an index part (through nu_i, which
// depends on every earlier skip). The index part is accumulated with one
// reverse suffix-sum pass.

#pragma once

#include "retime/errors.hpp"
#include "retime/interpolation.hpp"
#include "retime/signals.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace retime {

inline constexpr double kSkipFloor = 0.1;

enum class IndexGradient {
    Full,  // differentiate through the interpolation position
    Stop,  // treat guidance sampled at nu_i as constant
};

// Stop is the default: following the index slope lets steps slide their
// sampling position into more permissive classes, and descent then settles
// in visibly worse sub-samplings on piecewise-constant slowness.

struct AdamSettings {
    double learning_rate = 0.05;
    int steps = 5000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct RetimeConfig {
    double lambda_sum = 1.0;
    double lambda_min = 10.0;
    double lambda_smooth = 1.0;
    std::optional<double> lambda_signal;  // empty: (n / l) / mean(s)
    AdamSettings adam;
    double gap_threshold = kDefaultGapThreshold;
    IndexGradient index_gradient = IndexGradient::Stop;

    void validate() const
    {
        auto weight_ok = [](double w) { return std::isfinite(w) && w >= 0.0; };
        if (!weight_ok(lambda_sum) || !weight_ok(lambda_min) || !weight_ok(lambda_smooth)) {
            throw InvalidInput("penalty weights must be finite and non-negative");
        }
        if (lambda_signal && !(std::isfinite(*lambda_signal) && *lambda_signal > 0.0)) {
            throw InvalidInput("signal strength lambda must be positive");
        }
        if (!(adam.learning_rate > 0.0) || adam.steps < 1) {
            throw InvalidInput("learning rate must be positive and steps >= 1");
        }
        if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
            !(adam.epsilon > 0.0)) {
            throw InvalidInput("invalid Adam hyperparameters");
        }
        if (!(gap_threshold > 0.0 && gap_threshold < 1.0)) {
            throw InvalidInput("gap threshold must lie in (0, 1)");
        }
    }
};

struct TermValues {
    double guidance = 0.0;  // slowness or signal term
    double sum = 0.0;
    double min = 0.0;
    double smooth = 0.0;
    double total = 0.0;
};

struct RetimeResult {
    std::vector<double> d_hat;
    std::vector<double> nu;  // l + 1 entries, nu[0] = 0
    std::vector<std::int64_t> frame_indices;
    std::vector<double> loss_trace;  // initial loss, then loss after each step
    TermValues terms;
    double duration_error = 0.0;  // |nu.back() - n|
    std::optional<double> lambda_signal;
};

/// Source positions [0, d1, d1 + d2, ..., sum d].
inline std::vector<double> subsampling_positions(std::span<const double> d)
{
    std::vector<double> nu(d.size() + 1, 0.0);
    std::partial_sum(d.begin(), d.end(), nu.begin() + 1);
    return nu;
}

inline double loss_sum(std::span<const double> d, double n)
{
    const double e = std::accumulate(d.begin(), d.end(), 0.0) - n;
    return e * e;
}

inline double loss_min(std::span<const double> d)
{
    double acc = 0.0;
    for (double v : d) {
        acc += std::max(0.0, 1.0 - v);
    }
    return acc;
}

inline double loss_smooth(std::span<const double> d)
{
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
        const double e = d[i + 1] - d[i];
        acc += e * e;
    }
    return acc;
}

/// Slowness rows are indexed directly by source position when the matrix
/// has n or n - 1 rows; any other row count is first resampled to n - 1.
inline SlownessMatrix align_slowness(const SlownessMatrix& p, std::int64_t n)
{
    const auto rows = static_cast<std::int64_t>(p.rows());
    if (rows == n || rows == n - 1 || p.rows() < 2) {
        return p;
    }
    return interpolate_rows(p, static_cast<std::size_t>(std::max<std::int64_t>(n - 1, 2)));
}

inline std::vector<double> align_signal(std::span<const double> s, std::int64_t n)
{
    const auto len = static_cast<std::int64_t>(s.size());
    if (len == n || len == n - 1 || s.size() < 2) {
        return {s.begin(), s.end()};
    }
    return resample_linear(s, static_cast<std::size_t>(std::max<std::int64_t>(n - 1, 2)));
}

/// Guidance from slowness likelihoods (already sharpened and aligned).
struct SlownessGuide {
    SlownessMatrix p;
};

/// Guidance from a normalized signal where 0 forbids speed-up.
struct SignalGuide {
    std::vector<double> weights;
    double lambda = 1.0;
};

using Guide = std::variant<SlownessGuide, SignalGuide>;

namespace detail {

// Guidance term over i = 0 .. l-2. Adds the hinge gradient into `grad` and
// returns the per-term derivative with respect to nu_i in `index_slope`.
inline double guidance_term(const SlownessGuide& g, std::span<const double> d,
                            std::vector<double>* grad, std::vector<double>* index_slope)
{
    const SlownessMatrix& p = g.p;
    const std::size_t c = p.classes();
    std::vector<double> allowed(c);
    for (std::size_t j = 0; j < c; ++j) {
        allowed[j] = allowed_skip(p.k(), static_cast<int>(j));
    }
    double loss = 0.0;
    double nu = 0.0;
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
        nu += d[i];
        const GridPoint gp = locate(nu, p.rows());
        const bool single = p.rows() < 2;
        double slope = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double h = std::max(0.0, d[i] - allowed[j]);
            if (h == 0.0) {
                continue;
            }
            double w = p(gp.lo, j);
            double dw = 0.0;
            if (!single) {
                const double b = p(gp.lo + 1, j);
                dw = gp.interior ? b - w : 0.0;
                w += gp.weight * (b - w);
            }
            loss += w * h * h;
            if (grad) {
                (*grad)[i] += 2.0 * w * h;
                slope += dw * h * h;
            }
        }
        if (index_slope) {
            (*index_slope)[i] = slope;
        }
    }
    return loss;
}

inline double guidance_term(const SignalGuide& g, std::span<const double> d,
                            std::vector<double>* grad, std::vector<double>* index_slope)
{
    double loss = 0.0;
    double nu = 0.0;
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
        nu += d[i];
        const Sample s = sample_linear(g.weights, nu);
        const double h = std::max(0.0, d[i] - g.lambda * s.value - 1.0);
        loss += h * h;
        if (grad) {
            (*grad)[i] += 2.0 * h;
        }
        if (index_slope) {
            (*index_slope)[i] = -2.0 * h * g.lambda * s.slope;
        }
    }
    return loss;
}

} // namespace detail

inline double loss_speediness(std::span<const double> d, const SlownessMatrix& p, std::int64_t n)
{
    return detail::guidance_term(SlownessGuide{align_slowness(p, n)}, d, nullptr, nullptr);
}

/// `weights` is the normalized signal in zero-means-no-speedup orientation.
inline double loss_signal(std::span<const double> d, std::span<const double> weights,
                          double lambda)
{
    return detail::guidance_term(SignalGuide{{weights.begin(), weights.end()}, lambda}, d,
                                 nullptr, nullptr);
}

/// lambda = (n / l) / mean(s); the signal strength that lets the average
/// frame absorb the overall reduction rate.
inline double default_lambda(std::int64_t n, std::int64_t l, const RetimeSignal& signal)
{
    if (l < 1 || n < 1) {
        throw InvalidInput("default_lambda needs positive n and l");
    }
    const auto w = signal.speedup_weights();
    const double mean = w.empty() ? 0.0 : std::accumulate(w.begin(), w.end(), 0.0) /
                                              static_cast<double>(w.size());
    if (!(mean > 0.0)) {
        throw DegenerateSignal("re-timing signal is zero everywhere, so no frame may be sped up; "
                               "use a uniform re-time or a different signal");
    }
    return (static_cast<double>(n) / static_cast<double>(l)) / mean;
}

/// A fully specified objective over skip vectors.
struct Objective {
    Guide guide;
    std::int64_t n = 0;
    double lambda_sum = 1.0;
    double lambda_min = 10.0;
    double lambda_smooth = 1.0;
    IndexGradient index_gradient = IndexGradient::Stop;

    static Objective from_config(Guide guide, std::int64_t n, const RetimeConfig& cfg)
    {
        return {std::move(guide), n, cfg.lambda_sum, cfg.lambda_min, cfg.lambda_smooth,
                cfg.index_gradient};
    }
};

struct LossAndGradient {
    TermValues terms;
    std::vector<double> gradient;
};

inline TermValues evaluate_terms(const Objective& obj, std::span<const double> d)
{
    TermValues t;
    t.guidance = std::visit(
        [&](const auto& g) { return detail::guidance_term(g, d, nullptr, nullptr); }, obj.guide);
    t.sum = loss_sum(d, static_cast<double>(obj.n));
    t.min = loss_min(d);
    t.smooth = loss_smooth(d);
    t.total = t.guidance + obj.lambda_sum * t.sum + obj.lambda_min * t.min +
              obj.lambda_smooth * t.smooth;
    return t;
}

inline LossAndGradient total_loss_and_gradient(const Objective& obj, std::span<const double> d)
{
    const std::size_t l = d.size();
    LossAndGradient out;
    out.gradient.assign(l, 0.0);
    auto& grad = out.gradient;
    std::vector<double> index_slope(l, 0.0);

    TermValues& t = out.terms;
    t.guidance = std::visit(
        [&](const auto& g) { return detail::guidance_term(g, d, &grad, &index_slope); },
        obj.guide);
    if (obj.index_gradient == IndexGradient::Full) {
        // nu_i depends on d_0..d_i, so d_t collects the slopes of all i >= t
        double suffix = 0.0;
        for (std::size_t i = l; i-- > 0;) {
            suffix += index_slope[i];
            grad[i] += suffix;
        }
    }

    const double excess = std::accumulate(d.begin(), d.end(), 0.0) - static_cast<double>(obj.n);
    t.sum = excess * excess;
    t.min = loss_min(d);
    t.smooth = loss_smooth(d);
    for (std::size_t i = 0; i < l; ++i) {
        grad[i] += obj.lambda_sum * 2.0 * excess;
        if (d[i] < 1.0) {
            grad[i] -= obj.lambda_min;
        }
        if (i > 0) {
            grad[i] += obj.lambda_smooth * 2.0 * (d[i] - d[i - 1]);
        }
        if (i + 1 < l) {
            grad[i] -= obj.lambda_smooth * 2.0 * (d[i + 1] - d[i]);
        }
    }
    t.total = t.guidance + obj.lambda_sum * t.sum + obj.lambda_min * t.min +
              obj.lambda_smooth * t.smooth;
    return out;
}

/// Round to the nearest frame, clamp to [0, n - 1], and force the sequence
/// to be non-decreasing.
inline std::vector<std::int64_t> to_frame_indices(std::span<const double> nu, std::int64_t n)
{
    std::vector<std::int64_t> out(nu.size());
    std::int64_t floor_idx = 0;
    for (std::size_t i = 0; i < nu.size(); ++i) {
        auto r = static_cast<std::int64_t>(std::llround(nu[i]));
        r = std::clamp<std::int64_t>(r, 0, std::max<std::int64_t>(n - 1, 0));
        floor_idx = std::max(floor_idx, r);
        out[i] = floor_idx;
    }
    return out;
}

/// Adam on `obj` starting from `d`, projecting every skip onto [kSkipFloor, inf)
/// after each step. Returns the visited iterate with the lowest total loss;
/// the stop-gradient direction is not the gradient of any potential, so the
/// last iterate can sit above an earlier one.
inline RetimeResult minimize(const Objective& obj, std::vector<double> d, const AdamSettings& adam)
{
    const std::size_t l = d.size();
    std::vector<double> m(l, 0.0);
    std::vector<double> v(l, 0.0);
    RetimeResult r;
    r.loss_trace.reserve(static_cast<std::size_t>(adam.steps) + 1);
    std::vector<double> best = d;
    double best_loss = std::numeric_limits<double>::infinity();
    double b1t = 1.0;
    double b2t = 1.0;
    for (int step = 0; step < adam.steps; ++step) {
        const LossAndGradient lg = total_loss_and_gradient(obj, d);
        r.loss_trace.push_back(lg.terms.total);
        if (lg.terms.total < best_loss) {
            best_loss = lg.terms.total;
            best = d;
        }
        b1t *= adam.beta1;
        b2t *= adam.beta2;
        const double lr_t = adam.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
        for (std::size_t i = 0; i < l; ++i) {
            const double g = lg.gradient[i];
            m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g;
            v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g * g;
            d[i] -= lr_t * m[i] / (std::sqrt(v[i]) + adam.epsilon * std::sqrt(1.0 - b2t));
            d[i] = std::max(d[i], kSkipFloor);
        }
    }
    const TermValues last = evaluate_terms(obj, d);
    r.loss_trace.push_back(last.total);
    if (last.total < best_loss) {
        best = std::move(d);
        r.terms = last;
    } else {
        r.terms = evaluate_terms(obj, best);
    }
    r.nu = subsampling_positions(best);
    r.frame_indices = to_frame_indices(r.nu, obj.n);
    r.duration_error = std::abs(r.nu.back() - static_cast<double>(obj.n));
    r.d_hat = std::move(best);
    return r;
}

namespace detail {

inline void check_target(std::int64_t n, std::int64_t l)
{
    if (l < 2) {
        throw InvalidInput("target length must be at least 2 frames");
    }
    if (l >= n) {
        throw InvalidTarget("target length " + std::to_string(l) +
                            " must be smaller than the source length " + std::to_string(n));
    }
}

} // namespace detail

/// Re-time against slowness likelihoods: sharpen once, then descend from
/// the uniform sub-sampling d = n / l.
inline RetimeResult optimize(const SlownessMatrix& p, std::int64_t n, std::int64_t l,
                             const RetimeConfig& cfg = {})
{
    cfg.validate();
    detail::check_target(n, l);
    const Objective obj = Objective::from_config(
        SlownessGuide{align_slowness(sharpen(p, cfg.gap_threshold), n)}, n, cfg);
    return minimize(obj,
                    std::vector<double>(static_cast<std::size_t>(l),
                                        static_cast<double>(n) / static_cast<double>(l)),
                    cfg.adam);
}

/// Re-time against a general signal; lambda defaults to default_lambda.
inline RetimeResult optimize(const RetimeSignal& signal, std::int64_t n, std::int64_t l,
                             const RetimeConfig& cfg = {})
{
    cfg.validate();
    detail::check_target(n, l);
    const double lambda = cfg.lambda_signal ? *cfg.lambda_signal : default_lambda(n, l, signal);
    const Objective obj = Objective::from_config(
        SignalGuide{align_signal(signal.speedup_weights(), n), lambda}, n, cfg);
    RetimeResult r = minimize(
        obj,
        std::vector<double>(static_cast<std::size_t>(l),
                            static_cast<double>(n) / static_cast<double>(l)),
        cfg.adam);
    r.lambda_signal = lambda;
    return r;
}

} // namespace retime
