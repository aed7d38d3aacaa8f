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

// Synthetic time-varying frame-skip sequences with perfect slowness
// predictions, for evaluating re-timing without a trained model.

#pragma once

#include "retime/errors.hpp"
#include "retime/random.hpp"
#include "retime/signals.hpp"

#include <bit>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace retime {

inline constexpr double kMaxSigma = 0.1;

/// Probability of a playback-speed change per step, uniform in [0, 0.1).
inline double sample_sigma(Rng& rng)
{
    return kMaxSigma * uniform_unit(rng);
}

/// Markov chain over skips {2^0, ..., 2^k}: stay with probability 1 - sigma,
/// otherwise jump to one of the other k values uniformly.
class SkipChain {
public:
    SkipChain(int k, double sigma) : k_(k), sigma_(sigma)
    {
        if (k < 1) {
            throw InvalidInput("skip chain needs k >= 1");
        }
        if (!(sigma >= 0.0 && sigma <= 1.0)) {
            throw InvalidInput("sigma must lie in [0, 1], got " + std::to_string(sigma));
        }
    }

    /// Exponent y of the next skip 2^y.
    int next(Rng& rng)
    {
        if (state_ < 0) {
            state_ = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(k_ + 1)));
            return state_;
        }
        if (uniform_unit(rng) < sigma_) {
            int other = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(k_)));
            if (other >= state_) {
                ++other;
            }
            state_ = other;
        }
        return state_;
    }

private:
    int k_;
    double sigma_;
    int state_ = -1;
};

inline std::vector<int> sample_skips(int m, int k, double sigma, Rng& rng)
{
    if (m < 1) {
        throw InvalidInput("sample_skips needs m >= 1");
    }
    SkipChain chain(k, sigma);
    std::vector<int> skips(static_cast<std::size_t>(m));
    for (auto& s : skips) {
        s = 1 << chain.next(rng);
    }
    return skips;
}

/// Frame positions rho + [0, d1, d1 + d2, ..., sum d] with a random offset
/// rho uniform in [0, n_source - sum d]. Positions are frame boundaries, so
/// the last one may equal n_source.
inline std::vector<std::int64_t> skips_to_indices(const std::vector<int>& skips,
                                                  std::int64_t n_source, Rng& rng)
{
    const std::int64_t total = std::accumulate(skips.begin(), skips.end(), std::int64_t{0});
    if (n_source < total) {
        throw InvalidInput("source has " + std::to_string(n_source) + " frames but skips sum to " +
                           std::to_string(total));
    }
    const auto rho = static_cast<std::int64_t>(
        uniform_below(rng, static_cast<std::uint64_t>(n_source - total + 1)));
    std::vector<std::int64_t> out;
    out.reserve(skips.size() + 1);
    out.push_back(rho);
    for (int s : skips) {
        out.push_back(out.back() + s);
    }
    return out;
}

struct GroundTruthCase {
    std::uint64_t seed = 0;
    int k = 2;
    std::vector<int> skips;
    std::vector<int> labels;  // log2(skips)
    std::int64_t n = 0;       // source frames, sum of skips
    std::int64_t l = 0;       // target frames, number of skips
    SlownessMatrix slowness;  // n rows, one-hot
};

/// Perfect slowness predictions: each source frame consumed by step i is
/// one-hot at the class whose admissible skip equals skips[i].
inline SlownessMatrix perfect_slowness(const std::vector<int>& skips, int k)
{
    const std::size_t c = static_cast<std::size_t>(k + 1);
    std::vector<double> flat;
    for (int s : skips) {
        if (s < 1 || !std::has_single_bit(static_cast<unsigned>(s)) || s > (1 << k)) {
            throw InvalidInput("skip " + std::to_string(s) + " is not a power of two in [1, 2^k]");
        }
        const int j = k - std::countr_zero(static_cast<unsigned>(s));
        for (int f = 0; f < s; ++f) {
            flat.resize(flat.size() + c, 0.0);
            flat[flat.size() - c + static_cast<std::size_t>(j)] = 1.0;
        }
    }
    const std::size_t rows = flat.size() / c;
    return SlownessMatrix(k, rows, std::move(flat));
}

/// Assemble a case from explicit skips (used by make_case and file loading).
inline GroundTruthCase case_from_skips(std::vector<int> skips, int k, std::uint64_t seed)
{
    GroundTruthCase c;
    c.seed = seed;
    c.k = k;
    c.slowness = perfect_slowness(skips, k);
    c.labels.reserve(skips.size());
    for (int s : skips) {
        c.labels.push_back(std::countr_zero(static_cast<unsigned>(s)));
    }
    c.n = std::accumulate(skips.begin(), skips.end(), std::int64_t{0});
    c.l = static_cast<std::int64_t>(skips.size());
    c.skips = std::move(skips);
    return c;
}

inline GroundTruthCase make_case(int l, int k, double sigma, std::uint64_t seed)
{
    if (l < 2) {
        throw InvalidInput("make_case needs l >= 2");
    }
    Rng rng(seed);
    return case_from_skips(sample_skips(l, k, sigma, rng), k, seed);
}

/// A case covering exactly `fps * seconds` source frames. Skips are drawn from
/// the chain until the next one would overshoot; the remainder is then filled
/// with descending powers of two so every skip stays in {2^0..2^k}.
/// sigma is drawn from the seed unless given.
inline GroundTruthCase make_duration_case(double seconds, int fps, int k, std::uint64_t seed,
                                          std::optional<double> sigma = std::nullopt)
{
    if (!(seconds > 0.0) || fps < 1) {
        throw InvalidInput("duration and fps must be positive");
    }
    const auto n = static_cast<std::int64_t>(std::llround(seconds * fps));
    if (n < 2) {
        throw InvalidInput("duration case needs at least 2 source frames");
    }
    Rng rng(seed);
    const double s = sigma ? *sigma : sample_sigma(rng);
    SkipChain chain(k, s);
    std::vector<int> skips;
    std::int64_t total = 0;
    while (total < n) {
        const int skip = 1 << chain.next(rng);
        if (total + skip > n) {
            std::int64_t rest = n - total;
            for (int y = k; y >= 0; --y) {
                while (rest >= (1 << y)) {
                    skips.push_back(1 << y);
                    rest -= 1 << y;
                }
            }
            break;
        }
        skips.push_back(skip);
        total += skip;
    }
    if (skips.size() < 2) {
        throw InvalidInput("duration case produced fewer than 2 skips; increase the duration");
    }
    return case_from_skips(std::move(skips), k, seed);
}

} // namespace retime
