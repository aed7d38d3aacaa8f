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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace retime {

/// Location of a real-valued position on a sampled grid of `count` knots.
///
/// Positions outside [0, count-1] are clamped to the boundary knot; there the
/// interpolant is constant so `interior` is false and the slope is zero.
struct GridPoint {
    std::size_t lo = 0;
    double weight = 0.0;  // fraction towards lo + 1
    bool interior = false;
};

inline GridPoint locate(double position, std::size_t count)
{
    GridPoint g;
    if (count < 2) {
        return g;
    }
    const double last = static_cast<double>(count - 1);
    if (!(position > 0.0)) {
        return g;
    }
    if (position >= last) {
        g.lo = count - 2;
        g.weight = 1.0;
        return g;
    }
    g.lo = std::min(static_cast<std::size_t>(std::floor(position)), count - 2);
    g.weight = position - static_cast<double>(g.lo);
    g.interior = true;
    return g;
}

/// Value and derivative (w.r.t. position) of a piecewise-linear 1-D signal.
struct Sample {
    double value = 0.0;
    double slope = 0.0;
};

inline Sample sample_linear(std::span<const double> values, double position)
{
    if (values.empty()) {
        return {};
    }
    if (values.size() == 1) {
        return {values[0], 0.0};
    }
    const GridPoint g = locate(position, values.size());
    const double a = values[g.lo];
    const double b = values[g.lo + 1];
    return {a + g.weight * (b - a), g.interior ? b - a : 0.0};
}

/// Endpoint-aligned linear resampling: source knot i lands on
/// i * (target - 1) / (source - 1).
inline std::vector<double> resample_linear(std::span<const double> values, std::size_t target)
{
    std::vector<double> out(target);
    if (values.empty() || target == 0) {
        return out;
    }
    if (target == 1 || values.size() == 1) {
        std::fill(out.begin(), out.end(), values.front());
        return out;
    }
    const double scale = static_cast<double>(values.size() - 1) / static_cast<double>(target - 1);
    for (std::size_t i = 0; i < target; ++i) {
        out[i] = sample_linear(values, static_cast<double>(i) * scale).value;
    }
    out.front() = values.front();
    out.back() = values.back();
    return out;
}

} // namespace retime
