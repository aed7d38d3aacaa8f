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

#include "oracles.hpp"
#include "retime/optimizer.hpp"
#include "retime/random.hpp"
#include "retime/synth.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

using Catch::Approx;
using namespace retime;

using namespace oracle;

TEST_CASE("penalty terms")
{
    CHECK(loss_sum(std::vector<double>{2, 2, 2}, 6) == 0.0);
    CHECK(loss_sum(std::vector<double>{1, 1}, 4) == 4.0);
    CHECK(loss_sum(std::vector<double>{3.5}, 3) == 0.25);

    CHECK(loss_min(std::vector<double>{1, 2, 4}) == 0.0);
    CHECK(loss_min(std::vector<double>{0.5, 1, 2}) == 0.5);
    CHECK(loss_min(std::vector<double>{0.25, 0.75}) == 1.0);

    CHECK(loss_smooth(std::vector<double>{2, 2, 2}) == 0.0);
    CHECK(loss_smooth(std::vector<double>{1, 2, 4}) == 5.0);
    CHECK(loss_smooth(std::vector<double>{4, 1}) == 9.0);
}

TEST_CASE("slowness guidance term")
{
    const auto fast = SlownessMatrix::constant_class(2, 16, 0);
    CHECK(loss_speediness(std::vector<double>{4, 3, 2, 4}, fast, 16) == 0.0);

    const auto slow = SlownessMatrix::constant_class(2, 16, 2);
    CHECK(loss_speediness(std::vector<double>{3, 0.5}, slow, 16) == 4.0);

    const auto mixed = SlownessMatrix::from_rows(2, std::vector<std::vector<double>>(
                                                        10, std::vector<double>{0.5, 0.0, 0.5}));
    CHECK(loss_speediness(std::vector<double>{3, 3, 3}, mixed, 10) == Approx(4.0));
}

TEST_CASE("signal guidance term")
{
    const std::vector<double> zero(9, 0.0);
    CHECK(loss_signal(std::vector<double>(10, 1.0), zero, 1.0) == 0.0);
    const std::vector<double> one(20, 1.0);
    CHECK(loss_signal(std::vector<double>{5, 5, 5}, one, 3.0) == Approx(2.0));
    const std::vector<double> half(20, 0.5);
    CHECK(loss_signal(std::vector<double>{2, 2, 2, 2}, half, 2.0) == 0.0);
}

TEST_CASE("default_lambda")
{
    CHECK(default_lambda(100, 50, normalize_signal(std::vector<double>{0, 1})) == Approx(4.0));
    CHECK(default_lambda(90, 30, normalize_signal(std::vector<double>{0, 1, 0.8})) == Approx(5.0));
    RetimeSignal ones;
    ones.raw = {1, 1, 1};
    ones.normalized = {1, 1, 1};
    CHECK(default_lambda(40, 40, ones) == Approx(1.0));
    CHECK_THROWS_AS(default_lambda(100, 50, normalize_signal(std::vector<double>{2, 2})),
                    DegenerateSignal);
}

TEST_CASE("gradient matches finite differences in both index modes")
{
    Rng rng(101);
    int checked = 0;
    for (int trial = 0; trial < 400 && checked < 240; ++trial) {
        const std::size_t l = 4 + uniform_below(rng, 61);
        const int k = 1 + static_cast<int>(uniform_below(rng, 3));
        const bool signal = uniform_below(rng, 3) == 0;
        const IndexGradient mode = uniform_below(rng, 2) ? IndexGradient::Full : IndexGradient::Stop;
        const Instance in = random_instance(rng, l, k, signal, mode);
        if (near_kink(in, 1e-3)) {
            continue;
        }
        ++checked;
        INFO("l=" << l << " k=" << k << " signal=" << signal
                  << " full=" << (mode == IndexGradient::Full));
        CHECK(gradient_error(in) < 1e-4);
    }
    CHECK(checked >= 100);
}

TEST_CASE("sum-only gradient is 2 (sum d - n)")
{
    const std::vector<double> d{1.5, 2.0, 3.0, 2.5};
    Objective obj{SlownessGuide{SlownessMatrix::constant_class(2, 20, 0)}, 20, 1.0, 0.0, 0.0,
                  IndexGradient::Full};
    const auto lg = total_loss_and_gradient(obj, d);
    for (double g : lg.gradient) {
        CHECK(g == Approx(2.0 * (9.0 - 20.0)));
    }
}

TEST_CASE("to_frame_indices")
{
    CHECK(to_frame_indices(std::vector<double>{0, 1.4, 3.6}, 10) ==
          std::vector<std::int64_t>{0, 1, 4});
    CHECK(to_frame_indices(std::vector<double>{0, 9.7}, 10) == std::vector<std::int64_t>{0, 9});
    CHECK(to_frame_indices(std::vector<double>{0, 2.49, 2.51}, 10) ==
          std::vector<std::int64_t>{0, 2, 3});
}

TEST_CASE("forced optimum is recovered")
{
    const auto p = SlownessMatrix::constant_class(2, 128, 0);
    const auto r = optimize(p, 128, 32);
    REQUIRE(r.d_hat.size() == 32);
    for (double d : r.d_hat) {
        CHECK(d == Approx(4.0).margin(0.05));
    }
    CHECK(r.duration_error < 0.5);
    CHECK(r.terms.total < 1e-4);
    CHECK(r.loss_trace.size() == static_cast<std::size_t>(AdamSettings{}.steps) + 1);
    CHECK(r.loss_trace.back() <= r.loss_trace.front());

    // stationarity at the converged point
    const auto lg = total_loss_and_gradient(
        Objective::from_config(SlownessGuide{p}, 128, RetimeConfig{}), r.d_hat);
    double norm = 0.0;
    for (double g : lg.gradient) {
        norm += g * g;
    }
    CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("all-slow input compresses uniformly (brute-force oracle)")
{
    const std::int64_t n = 64;
    const std::int64_t l = 32;
    const auto p = SlownessMatrix::constant_class(2, 64, 2);
    Oracle o;
    o.rows = std::vector<std::vector<double>>(64, std::vector<double>{0, 0, 1});
    o.k = 2;
    o.n = 64;
    double best_c = 0.0;
    double best = INFINITY;
    for (double c = 1.0; c <= 3.0; c += 1e-5) {
        const double f = o.loss(std::vector<double>(32, c));
        if (f < best) {
            best = f;
            best_c = c;
        }
    }
    CHECK(best_c == Approx(2079.0 / 1055.0).margin(1e-4));

    // Exact optimum: with every d in (1, 2] the objective is the quadratic
    // sum_{i<l-1} (d_i - 1)^2 + (sum d - n)^2 + sum (d_i - d_{i-1})^2.
    // Solve its normal equations by dense elimination.
    const std::size_t m = 32;
    std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            a[i][j] = 1.0;
        }
        a[i][m] = 64.0;
        if (i + 1 < m) {
            a[i][i] += 1.0;
            a[i][m] += 1.0;
        }
        if (i > 0) {
            a[i][i] += 1.0;
            a[i][i - 1] -= 1.0;
        }
        if (i + 1 < m) {
            a[i][i] += 1.0;
            a[i][i + 1] -= 1.0;
        }
    }
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t r = c + 1; r < m; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t q = c; q <= m; ++q) {
                a[r][q] -= f * a[c][q];
            }
        }
    }
    std::vector<double> exact(m);
    for (std::size_t c = m; c-- > 0;) {
        double acc = a[c][m];
        for (std::size_t q = c + 1; q < m; ++q) {
            acc -= a[c][q] * exact[q];
        }
        exact[c] = acc / a[c][c];
    }
    for (double x : exact) {
        REQUIRE(x > 1.0);
    }

    const auto r = optimize(p, n, l);
    for (std::size_t i = 0; i < m; ++i) {
        CHECK(r.d_hat[i] == Approx(exact[i]).margin(1e-3));
    }
    // near-uniform compression by about n / l
    for (std::size_t i = 0; i + 4 < m; ++i) {
        CHECK(r.d_hat[i] == Approx(best_c).margin(0.1));
    }
    // the free search can only do better than the best constant
    CHECK(r.terms.total <= best + 1e-6);
}

TEST_CASE("zero signal with l = n keeps every frame")
{
    const std::int64_t n = 30;
    Objective obj{SignalGuide{std::vector<double>(29, 0.0), 1.0}, n};
    const auto r = minimize(obj, std::vector<double>(30, 1.0), AdamSettings{});
    for (double d : r.d_hat) {
        CHECK(d == Approx(1.0).margin(1e-9));
    }
    CHECK(r.terms.total == Approx(0.0).margin(1e-12));
}

TEST_CASE("optimize preconditions")
{
    const auto p = SlownessMatrix::constant_class(2, 10, 0);
    CHECK_THROWS_AS(optimize(p, 10, 10), InvalidTarget);
    CHECK_THROWS_AS(optimize(p, 10, 12), InvalidTarget);
    CHECK_THROWS_AS(optimize(p, 10, 1), InvalidInput);
    RetimeConfig bad;
    bad.lambda_min = -1.0;
    CHECK_THROWS_AS(optimize(p, 10, 5, bad), InvalidInput);
    bad = RetimeConfig{};
    bad.adam.steps = 0;
    CHECK_THROWS_AS(optimize(p, 10, 5, bad), InvalidInput);
    CHECK_THROWS_AS(optimize(normalize_signal(std::vector<double>{1, 1, 1}), 10, 5),
                    DegenerateSignal);
}

TEST_CASE("result invariants on random problems")
{
    Rng rng(103);
    const RetimeConfig cfg;
    for (int trial = 0; trial < 10; ++trial) {
        const std::int64_t n = 60 + static_cast<std::int64_t>(uniform_below(rng, 100));
        const std::int64_t l = n / 2 - static_cast<std::int64_t>(uniform_below(rng, 10));
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(n), std::vector<double>(3));
        for (auto& r : rows) {
            double s = 0.0;
            for (auto& x : r) {
                x = uniform_unit(rng) + 0.05;
                s += x;
            }
            for (auto& x : r) {
                x /= s;
            }
        }
        const auto r = optimize(SlownessMatrix::from_rows(2, rows), n, l, cfg);
        REQUIRE(r.nu.size() == static_cast<std::size_t>(l) + 1);
        CHECK(r.nu[0] == 0.0);
        for (std::size_t i = 1; i < r.nu.size(); ++i) {
            CHECK(r.nu[i] > r.nu[i - 1]);
        }
        for (std::size_t i = 0; i < r.frame_indices.size(); ++i) {
            CHECK(r.frame_indices[i] >= 0);
            CHECK(r.frame_indices[i] <= n - 1);
            if (i > 0) {
                CHECK(r.frame_indices[i] >= r.frame_indices[i - 1]);
            }
        }
        for (double d : r.d_hat) {
            CHECK(d >= kSkipFloor);
        }
        CHECK(r.terms.guidance >= 0.0);
        CHECK(r.terms.sum >= 0.0);
        CHECK(r.terms.min >= 0.0);
        CHECK(r.terms.smooth >= 0.0);
        CHECK(r.duration_error == Approx(std::abs(r.nu.back() - double(n))));
        CHECK(r.terms.total < r.loss_trace.front());
        CHECK(*std::min_element(r.loss_trace.begin(), r.loss_trace.end()) == r.terms.total);
    }
}

TEST_CASE("duration holds on synthetic cases")
{
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto c = make_duration_case(20.0, 30, 2, seed);
        if (c.l >= c.n) {
            continue;
        }
        const auto r = optimize(c.slowness, c.n, c.l);
        CHECK(r.duration_error <= 0.01 * double(c.n));
    }
}

TEST_CASE("fast block shifts the fast region of the solution")
{
    const std::int64_t n = 400;
    const std::int64_t l = 250;
    auto profile = [&](std::size_t start) {
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(n),
                                              std::vector<double>{0, 0, 1});
        for (std::size_t r = start; r < start + 120; ++r) {
            rows[r] = {1, 0, 0};
        }
        const auto res = optimize(SlownessMatrix::from_rows(2, rows), n, l);
        // skip length seen at each source frame
        std::vector<double> out(static_cast<std::size_t>(n), 0.0);
        for (std::size_t i = 0; i < res.d_hat.size(); ++i) {
            const auto a = static_cast<std::size_t>(std::clamp(res.nu[i], 0.0, double(n)));
            const auto b = static_cast<std::size_t>(std::clamp(res.nu[i + 1], 0.0, double(n)));
            for (std::size_t f = a; f < b; ++f) {
                out[f] = res.d_hat[i];
            }
        }
        return out;
    };
    const auto a = profile(60);
    const auto b = profile(200);
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / double(n);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / double(n);
    int best_lag = 0;
    double best = -INFINITY;
    for (int lag = -200; lag <= 200; ++lag) {
        double acc = 0.0;
        for (int f = 0; f < int(n); ++f) {
            const int g = f + lag;
            if (g >= 0 && g < int(n)) {
                acc += (a[std::size_t(f)] - ma) * (b[std::size_t(g)] - mb);
            }
        }
        if (acc > best) {
            best = acc;
            best_lag = lag;
        }
    }
    CHECK(std::abs(best_lag - 140) <= 6);
}
