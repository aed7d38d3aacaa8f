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

// Independent re-implementation of the re-timing objective and a
// finite-difference gradient check, shared by the unit and acceptance tests.

#pragma once

#include "retime/optimizer.hpp"
#include "retime/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

namespace oracle {

using namespace retime;

// Straightforward re-implementation of the objective, used as the
// finite-difference target. `frozen` holds per-step guidance weights that
// replace the interpolated ones (the stop-gradient objective).
struct Oracle {
    std::vector<std::vector<double>> rows;  // slowness rows, or 1-wide signal
    int k = 0;
    bool signal = false;
    double lambda = 1.0;
    double n = 0.0;
    double ls = 1.0;
    double lm = 10.0;
    double lsm = 1.0;

    std::vector<double> weights_at(double nu) const
    {
        const double last = static_cast<double>(rows.size() - 1);
        const double x = std::clamp(nu, 0.0, last);
        const auto lo = std::min(static_cast<std::size_t>(x), rows.size() - 2);
        const double t = x - static_cast<double>(lo);
        std::vector<double> w(rows[0].size());
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] = (1 - t) * rows[lo][j] + t * rows[lo + 1][j];
        }
        return w;
    }

    std::vector<std::vector<double>> all_weights(const std::vector<double>& d) const
    {
        std::vector<std::vector<double>> out;
        double nu = 0.0;
        for (std::size_t i = 0; i + 1 < d.size(); ++i) {
            nu += d[i];
            out.push_back(weights_at(nu));
        }
        return out;
    }

    double loss(const std::vector<double>& d,
                const std::optional<std::vector<std::vector<double>>>& frozen = {}) const
    {
        const auto w = frozen ? *frozen : all_weights(d);
        double g = 0.0;
        for (std::size_t i = 0; i + 1 < d.size(); ++i) {
            if (signal) {
                const double h = std::max(0.0, d[i] - lambda * w[i][0] - 1.0);
                g += h * h;
            } else {
                for (std::size_t j = 0; j < w[i].size(); ++j) {
                    const double h = std::max(0.0, d[i] - std::pow(2.0, k - int(j)));
                    g += w[i][j] * h * h;
                }
            }
        }
        const double sum = std::accumulate(d.begin(), d.end(), 0.0) - n;
        double mn = 0.0;
        double sm = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            mn += std::max(0.0, 1.0 - d[i]);
            if (i > 0) {
                sm += (d[i] - d[i - 1]) * (d[i] - d[i - 1]);
            }
        }
        return g + ls * sum * sum + lm * mn + lsm * sm;
    }
};

struct Instance {
    Oracle oracle;
    Objective objective;
    std::vector<double> d;
};

inline Instance random_instance(Rng& rng, std::size_t l, int k, bool signal, IndexGradient mode)
{
    Instance in;
    const double ratio = 1.5 + 2.0 * uniform_unit(rng);
    const auto n = static_cast<std::int64_t>(std::llround(ratio * static_cast<double>(l)));
    const std::size_t rows = static_cast<std::size_t>(n) - (uniform_below(rng, 2) ? 1 : 0);
    Oracle& o = in.oracle;
    o.k = k;
    o.signal = signal;
    o.n = static_cast<double>(n);
    o.ls = 0.5 + uniform_unit(rng);
    o.lm = 5.0 + 10.0 * uniform_unit(rng);
    o.lsm = 0.1 + 2.0 * uniform_unit(rng);
    o.lambda = 0.5 + 4.0 * uniform_unit(rng);
    o.rows.resize(rows);
    for (auto& r : o.rows) {
        r.resize(signal ? 1 : static_cast<std::size_t>(k + 1));
        double s = 0.0;
        for (auto& x : r) {
            x = uniform_unit(rng) + 0.01;
            s += x;
        }
        if (!signal) {
            for (auto& x : r) {
                x /= s;
            }
        } else {
            r[0] = std::min(r[0], 1.0);
        }
    }
    Guide guide = SlownessGuide{};
    if (signal) {
        std::vector<double> w;
        for (const auto& r : o.rows) {
            w.push_back(r[0]);
        }
        guide = SignalGuide{w, o.lambda};
    } else {
        guide = SlownessGuide{SlownessMatrix::from_rows(k, o.rows)};
    }
    in.objective = Objective{guide, n, o.ls, o.lm, o.lsm, mode};
    in.d.resize(l);
    for (auto& x : in.d) {
        x = 0.3 + 2.0 * ratio * uniform_unit(rng);
    }
    return in;
}

// Kinks: L_min at d = 1, linear interpolation at integer nu, clamping at
// the last row.
inline bool near_kink(const Instance& in, double margin)
{
    double nu = 0.0;
    for (std::size_t i = 0; i < in.d.size(); ++i) {
        if (std::abs(in.d[i] - 1.0) < margin) {
            return true;
        }
        if (!in.oracle.signal) {
            for (int j = 0; j <= in.oracle.k; ++j) {
                if (std::abs(in.d[i] - std::pow(2.0, in.oracle.k - j)) < margin) {
                    return true;
                }
            }
        }
        nu += in.d[i];
        if (i + 1 < in.d.size() && std::abs(nu - std::round(nu)) < margin * double(in.d.size())) {
            return true;
        }
    }
    return false;
}

inline double relative_error(double a, double f)
{
    return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1.0});
}

// Max relative error of the analytic loss and gradient against the oracle
// loss and its central differences (h = 1e-4).
inline double gradient_error(const Instance& in)
{
    const double h = 1e-4;
    const auto lg = total_loss_and_gradient(in.objective, in.d);
    std::optional<std::vector<std::vector<double>>> frozen;
    if (in.objective.index_gradient == IndexGradient::Stop) {
        frozen = in.oracle.all_weights(in.d);
    }
    double worst = relative_error(lg.terms.total, in.oracle.loss(in.d));
    for (std::size_t i = 0; i < in.d.size(); ++i) {
        auto up = in.d;
        auto dn = in.d;
        up[i] += h;
        dn[i] -= h;
        const double fd = (in.oracle.loss(up, frozen) - in.oracle.loss(dn, frozen)) / (2 * h);
        worst = std::max(worst, relative_error(lg.gradient[i], fd));
    }
    return worst;
}

} // namespace oracle
