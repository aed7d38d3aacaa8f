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

// Per-frame slowness likelihoods and scalar re-timing signals.

#pragma once

#include "retime/errors.hpp"
#include "retime/interpolation.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace retime {

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kRowSumTolerance = 1e-6;
inline constexpr double kDefaultGapThreshold = 0.975;
inline constexpr int kSharpenIterationCap = 60;

/// Largest skip a frame of class j may take without looking sped up: 2^(k-j).
inline double allowed_skip(int k, int j)
{
    return std::ldexp(1.0, k - j);
}

/// Row-major (rows x (k+1)) matrix of per-position slowness class
/// probabilities. Column j holds p(frame plays at 1/2^(k-j) speed).
class SlownessMatrix {
public:
    SlownessMatrix() = default;

    SlownessMatrix(int k, std::size_t rows, std::vector<double> probs)
        : k_(k), rows_(rows), probs_(std::move(probs))
    {
        validate();
    }

    static SlownessMatrix from_rows(int k, const std::vector<std::vector<double>>& rows)
    {
        std::vector<double> flat;
        flat.reserve(rows.size() * static_cast<std::size_t>(k + 1));
        for (const auto& r : rows) {
            if (r.size() != static_cast<std::size_t>(k + 1)) {
                throw InvalidInput("slowness row has " + std::to_string(r.size()) +
                                   " columns, expected " + std::to_string(k + 1));
            }
            flat.insert(flat.end(), r.begin(), r.end());
        }
        return SlownessMatrix(k, rows.size(), std::move(flat));
    }

    /// Every row one-hot at class `j`.
    static SlownessMatrix constant_class(int k, std::size_t rows, int j)
    {
        std::vector<double> flat(rows * static_cast<std::size_t>(k + 1), 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            flat[r * static_cast<std::size_t>(k + 1) + static_cast<std::size_t>(j)] = 1.0;
        }
        return SlownessMatrix(k, rows, std::move(flat));
    }

    int k() const noexcept { return k_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t classes() const noexcept { return static_cast<std::size_t>(k_ + 1); }

    double operator()(std::size_t r, std::size_t j) const { return probs_[r * classes() + j]; }

    std::span<const double> row(std::size_t r) const
    {
        return std::span<const double>(probs_).subspan(r * classes(), classes());
    }

    std::span<const double> data() const noexcept { return probs_; }

    std::vector<double> column(std::size_t j) const
    {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) {
            out[r] = (*this)(r, j);
        }
        return out;
    }

    friend bool operator==(const SlownessMatrix&, const SlownessMatrix&) = default;

private:
    void validate()
    {
        if (k_ < 1) {
            throw InvalidInput("slowness matrix needs k >= 1, got " + std::to_string(k_));
        }
        if (probs_.size() != rows_ * classes()) {
            throw InvalidInput("slowness matrix data size does not match rows x (k+1)");
        }
        for (std::size_t r = 0; r < rows_; ++r) {
            double sum = 0.0;
            for (std::size_t j = 0; j < classes(); ++j) {
                double& v = probs_[r * classes() + j];
                if (!std::isfinite(v) || v < -kRowSumTolerance || v > 1.0 + kRowSumTolerance) {
                    throw InvalidInput("slowness entry out of [0, 1] at row " + std::to_string(r));
                }
                v = std::clamp(v, 0.0, 1.0);
                sum += v;
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance) {
                throw InvalidInput("slowness row " + std::to_string(r) + " sums to " +
                                   std::to_string(sum));
            }
        }
    }

    int k_ = 2;
    std::size_t rows_ = 0;
    std::vector<double> probs_;
};

enum class Orientation {
    ZeroMeansNoSpeedup,  // file tag "zero_slow"
    OneMeansNoSpeedup,   // file tag "one_slow"
};

/// A per-frame scalar signal together with its [0, 1]-normalized form.
struct RetimeSignal {
    std::vector<double> raw;
    std::vector<double> normalized;
    Orientation orientation = Orientation::ZeroMeansNoSpeedup;
    bool degenerate = false;  // raw was constant

    /// Normalized values with 0 meaning "keep at original speed".
    std::vector<double> speedup_weights() const
    {
        if (orientation == Orientation::ZeroMeansNoSpeedup || degenerate) {
            return normalized;
        }
        std::vector<double> out(normalized.size());
        std::transform(normalized.begin(), normalized.end(), out.begin(),
                       [](double v) { return 1.0 - v; });
        return out;
    }
};

inline RetimeSignal normalize_signal(std::span<const double> raw,
                                     Orientation orientation = Orientation::ZeroMeansNoSpeedup)
{
    if (raw.size() < 2) {
        throw InvalidInput("re-timing signal needs at least 2 values, got " +
                           std::to_string(raw.size()));
    }
    for (double v : raw) {
        if (!std::isfinite(v)) {
            throw InvalidInput("re-timing signal contains a non-finite value");
        }
    }
    RetimeSignal s;
    s.raw.assign(raw.begin(), raw.end());
    s.orientation = orientation;
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    const double range = *hi - *lo;
    s.normalized.assign(raw.size(), 0.0);
    if (range <= 0.0) {
        s.degenerate = true;
        return s;
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
        s.normalized[i] = (raw[i] - *lo) / range;
    }
    // exact endpoints regardless of rounding
    s.normalized[static_cast<std::size_t>(lo - raw.begin())] = 0.0;
    s.normalized[static_cast<std::size_t>(hi - raw.begin())] = 1.0;
    return s;
}

/// Resample every column onto `target_rows` positions with endpoint-aligned
/// linear interpolation, then renormalize rows.
inline SlownessMatrix interpolate_rows(const SlownessMatrix& p, std::size_t target_rows)
{
    if (p.rows() < 2) {
        throw InvalidInput("interpolate_rows needs at least 2 source rows");
    }
    if (target_rows < 2) {
        throw InvalidInput("interpolate_rows needs at least 2 target rows");
    }
    if (target_rows == p.rows()) {
        return p;
    }
    const std::size_t c = p.classes();
    std::vector<double> out(target_rows * c);
    for (std::size_t j = 0; j < c; ++j) {
        const auto col = resample_linear(p.column(j), target_rows);
        for (std::size_t r = 0; r < target_rows; ++r) {
            out[r * c + j] = col[r];
        }
    }
    for (std::size_t r = 0; r < target_rows; ++r) {
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            sum += out[r * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            out[r * c + j] /= sum;
        }
    }
    return SlownessMatrix(p.k(), target_rows, std::move(out));
}

namespace detail {

inline double global_gap(std::span<const double> v)
{
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
}

inline SlownessMatrix tempered(const SlownessMatrix& p, double temperature)
{
    const std::size_t c = p.classes();
    std::vector<double> out(p.rows() * c);
    std::vector<double> logits(c);
    for (std::size_t r = 0; r < p.rows(); ++r) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) {
            logits[j] = std::log(std::max(p(r, j), kProbabilityFloor)) / temperature;
            top = std::max(top, logits[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            logits[j] = std::exp(logits[j] - top);
            sum += logits[j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            out[r * c + j] = logits[j] / sum;
        }
    }
    return SlownessMatrix(p.k(), p.rows(), std::move(out));
}

} // namespace detail

/// Lower the softmax temperature (halving from 1) until the global
/// max - min entry gap exceeds `gap_threshold`. Returns the input when it
/// already satisfies the condition; gives up after kSharpenIterationCap
/// halvings (exactly tied rows cannot be separated).
inline SlownessMatrix sharpen(const SlownessMatrix& p, double gap_threshold = kDefaultGapThreshold)
{
    if (!(gap_threshold > 0.0 && gap_threshold < 1.0)) {
        throw InvalidInput("sharpen gap threshold must lie in (0, 1)");
    }
    if (p.rows() == 0 || detail::global_gap(p.data()) > gap_threshold) {
        return p;
    }
    double temperature = 1.0;
    for (int it = 0; it < kSharpenIterationCap; ++it) {
        temperature *= 0.5;
        SlownessMatrix q = detail::tempered(p, temperature);
        if (detail::global_gap(q.data()) > gap_threshold) {
            return q;
        }
    }
    return detail::tempered(p, temperature);
}

/// s_i = sum_j p[i, j] 2^(k-j): the expected admissible skip per position.
inline RetimeSignal speediness_to_signal(const SlownessMatrix& p)
{
    std::vector<double> raw(p.rows(), 0.0);
    for (std::size_t r = 0; r < p.rows(); ++r) {
        for (std::size_t j = 0; j < p.classes(); ++j) {
            raw[r] += p(r, j) * allowed_skip(p.k(), static_cast<int>(j));
        }
    }
    return normalize_signal(raw, Orientation::ZeroMeansNoSpeedup);
}

/// Cosine similarity between consecutive feature vectors (length n - 1).
inline RetimeSignal cosine_similarity_signal(const std::vector<std::vector<double>>& features)
{
    if (features.size() < 2) {
        throw InvalidInput("cosine signal needs at least 2 feature vectors");
    }
    const std::size_t dim = features.front().size();
    std::vector<double> norms(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].size() != dim) {
            throw InvalidInput("feature vector " + std::to_string(i) + " has dimension " +
                               std::to_string(features[i].size()) + ", expected " +
                               std::to_string(dim));
        }
        norms[i] = std::sqrt(std::inner_product(features[i].begin(), features[i].end(),
                                                features[i].begin(), 0.0));
        if (!(norms[i] > 0.0)) {
            throw InvalidInput("feature vector " + std::to_string(i) + " has zero norm");
        }
    }
    std::vector<double> raw(features.size() - 1);
    for (std::size_t i = 0; i + 1 < features.size(); ++i) {
        const double dot = std::inner_product(features[i].begin(), features[i].end(),
                                              features[i + 1].begin(), 0.0);
        raw[i] = std::clamp(dot / (norms[i] * norms[i + 1]), -1.0, 1.0);
    }
    if (raw.size() == 1) {
        // a single similarity cannot be range-normalized
        RetimeSignal s;
        s.raw = raw;
        s.normalized = {0.0};
        s.degenerate = true;
        return s;
    }
    return normalize_signal(raw, Orientation::ZeroMeansNoSpeedup);
}

} // namespace retime
