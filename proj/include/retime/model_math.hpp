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

// Speed-classifier training math that needs no network: the class-weighted
// cross-entropy and the temporal-difference activation augmentation.

#pragma once

#include "retime/errors.hpp"
#include "retime/signals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace retime {

/// omega_y = 1.25^(k - y); slower classes weigh more.
inline std::vector<double> class_weights(int k)
{
    if (k < 1) {
        throw InvalidInput("class_weights needs k >= 1");
    }
    std::vector<double> w(static_cast<std::size_t>(k + 1));
    for (int y = 0; y <= k; ++y) {
        w[static_cast<std::size_t>(y)] = std::pow(1.25, k - y);
    }
    return w;
}

/// -sum_r omega[y_r] log p[r, y_r] over a row-major (rows x (k+1)) matrix.
inline double weighted_ce_loss(std::span<const double> probs, std::span<const int> labels, int k,
                               std::span<const double> weights)
{
    const std::size_t c = static_cast<std::size_t>(k + 1);
    if (probs.size() != labels.size() * c) {
        throw InvalidInput("weighted_ce_loss: probs must be labels.size() x (k+1)");
    }
    if (weights.size() != c) {
        throw InvalidInput("weighted_ce_loss: need k+1 class weights");
    }
    double loss = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const int y = labels[r];
        if (y < 0 || y > k) {
            throw InvalidInput("label " + std::to_string(y) + " at row " + std::to_string(r) +
                               " outside [0, " + std::to_string(k) + "]");
        }
        const double p = std::max(probs[r * c + static_cast<std::size_t>(y)], kProbabilityFloor);
        loss -= weights[static_cast<std::size_t>(y)] * std::log(p);
    }
    return loss;
}

inline double weighted_ce_loss(std::span<const double> probs, std::span<const int> labels, int k)
{
    const auto w = class_weights(k);
    return weighted_ce_loss(probs, labels, k, w);
}

/// Dense (time x height x width x channels) activation tensor, channels
/// fastest.
class ActivationBlock {
public:
    ActivationBlock(std::size_t time, std::size_t height, std::size_t width, std::size_t channels)
        : shape_{time, height, width, channels}, values_(time * height * width * channels, 0.0)
    {
        if (time == 0 || height == 0 || width == 0 || channels == 0) {
            throw InvalidInput("activation block dimensions must be positive");
        }
    }

    const std::array<std::size_t, 4>& shape() const noexcept { return shape_; }
    std::size_t time() const noexcept { return shape_[0]; }
    std::size_t height() const noexcept { return shape_[1]; }
    std::size_t width() const noexcept { return shape_[2]; }
    std::size_t channels() const noexcept { return shape_[3]; }

    double& at(std::size_t t, std::size_t y, std::size_t x, std::size_t ch)
    {
        return values_[offset(t, y, x, ch)];
    }
    double at(std::size_t t, std::size_t y, std::size_t x, std::size_t ch) const
    {
        return values_[offset(t, y, x, ch)];
    }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::size_t offset(std::size_t t, std::size_t y, std::size_t x, std::size_t ch) const
    {
        return ((t * shape_[1] + y) * shape_[2] + x) * shape_[3] + ch;
    }

    std::array<std::size_t, 4> shape_;
    std::vector<double> values_;
};

/// [a_{0:t-1}, a_{1:t} - a_{0:t-1}] concatenated along channels:
/// (t+1, h, w, c) -> (t, h, w, 2c).
inline ActivationBlock temporal_difference_concat(const ActivationBlock& a)
{
    if (a.time() < 2) {
        throw InvalidInput("temporal difference needs at least 2 time steps");
    }
    const std::size_t c = a.channels();
    ActivationBlock out(a.time() - 1, a.height(), a.width(), 2 * c);
    for (std::size_t t = 0; t + 1 < a.time(); ++t) {
        for (std::size_t y = 0; y < a.height(); ++y) {
            for (std::size_t x = 0; x < a.width(); ++x) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double cur = a.at(t, y, x, ch);
                    out.at(t, y, x, ch) = cur;
                    out.at(t, y, x, c + ch) = a.at(t + 1, y, x, ch) - cur;
                }
            }
        }
    }
    return out;
}

} // namespace retime
