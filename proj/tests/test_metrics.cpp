/*
 *  Copyright 2026 The FDI Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#include <doctest.h>

#include "fdi/metrics.hpp"
#include "helpers/oracles.hpp"

using namespace fdi;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("psnr closed forms") {
    auto x = oracle::random_tensor<double>({3, 16, 16}, 1, 0.0, 0.8);
    CHECK(std::isinf(psnr(x, x)));

    Tensor<double> shifted = x;
    for (std::size_t i = 0; i < shifted.numel(); ++i) shifted[i] += 0.1;
    CHECK(psnr(x, shifted) == doctest::Approx(20.0).epsilon(1e-12));

    for (double eps : {0.1, 0.01, 0.001}) {
        Tensor<double> p = x;
        for (std::size_t i = 0; i < p.numel(); ++i) p[i] += eps;
        CHECK(std::abs(psnr(x, p) - (-20.0 * std::log10(eps))) <= 1e-9);
    }
}

TEST_CASE("psnr matches an independent recomputation") {
    auto a = oracle::random_tensor<double>({3, 32, 32}, 2, 0.0, 1.0);
    auto b = oracle::random_tensor<double>({3, 32, 32}, 3, 0.0, 1.0);
    double mse = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
    mse /= static_cast<double>(a.numel());
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-9));
}

TEST_CASE("ssim identities and stabilized constants") {
    auto x = oracle::random_tensor<double>({3, 32, 32}, 4, 0.0, 1.0);
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));

    const auto c = Tensor<double>::full({1, 16, 16}, 0.5);
    CHECK(ssim(c, c) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim matches the from-definition oracle") {
    auto a = oracle::random_tensor<double>({3, 24, 24}, 5, 0.0, 1.0);
    auto b = oracle::random_tensor<double>({3, 24, 24}, 6, 0.0, 1.0);
    CHECK(std::abs(ssim(a, b) - oracle::ssim_reference(a, b)) <= 1e-4);

    // a structured pair too: signal vs blurred-ish variant
    Tensor<double> s({1, 24, 24}), t({1, 24, 24});
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
            s.at(0, y, x) = 0.5 + 0.4 * std::sin(0.3 * x) * std::cos(0.2 * y);
            t.at(0, y, x) = 0.5 + 0.3 * std::sin(0.3 * x + 0.1) * std::cos(0.2 * y);
        }
    CHECK(std::abs(ssim(s, t) - oracle::ssim_reference(s, t)) <= 1e-4);
}

TEST_CASE("ssim is symmetric and rejects tiny images") {
    auto a = oracle::random_tensor<double>({1, 16, 16}, 7, 0.0, 1.0);
    auto b = oracle::random_tensor<double>({1, 16, 16}, 8, 0.0, 1.0);
    CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-10);
    Tensor<double> tiny({1, 8, 8});
    CHECK_THROWS_AS(ssim(tiny, tiny), std::invalid_argument);
}

TEST_CASE("l1 percentage closed forms and oracle") {
    auto x = oracle::random_tensor<double>({3, 16, 16}, 9, 0.0, 1.0);
    CHECK(l1_pct(x, x) == 0.0);
    Tensor<double> p = x;
    for (std::size_t i = 0; i < p.numel(); ++i) p[i] += 0.01;
    CHECK(l1_pct(x, p) == doctest::Approx(1.0).epsilon(1e-9));

    auto q = oracle::random_tensor<double>({3, 16, 16}, 10, 0.0, 1.0);
    double want = 0;
    for (std::size_t i = 0; i < x.numel(); ++i) want += std::abs(x[i] - q[i]);
    want = 100.0 * want / static_cast<double>(x.numel());
    CHECK(l1_pct(x, q) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("all three metrics are invariant to identical channel permutations") {
    auto a = oracle::random_tensor<double>({3, 16, 16}, 11, 0.0, 1.0);
    auto b = oracle::random_tensor<double>({3, 16, 16}, 12, 0.0, 1.0);
    Tensor<double> ap(a.shape()), bp(b.shape());
    const int perm[3] = {2, 0, 1};
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                ap.at(c, y, x) = a.at(perm[c], y, x);
                bp.at(c, y, x) = b.at(perm[c], y, x);
            }
    CHECK(psnr(a, b) == doctest::Approx(psnr(ap, bp)).epsilon(1e-12));
    CHECK(ssim(a, b) == doctest::Approx(ssim(ap, bp)).epsilon(1e-12));
    CHECK(l1_pct(a, b) == doctest::Approx(l1_pct(ap, bp)).epsilon(1e-12));
}

TEST_CASE("aggregation means, bucket structure and infinity policy") {
    std::vector<MetricRow> rows{
        {"a", "10-20", 20.0, 0.9, 1.0},
        {"b", "10-20", 30.0, 0.8, 2.0},
        {"c", "regular", std::numeric_limits<double>::infinity(), 1.0, 0.0},
        {"d", "regular", 25.0, 0.7, 3.0},
    };
    const auto aggs = aggregate(rows);
    REQUIRE(aggs.size() == 2);
    CHECK(aggs[0].bucket == "10-20");
    CHECK(aggs[0].psnr_mean == doctest::Approx(25.0));
    CHECK(aggs[0].ssim_mean == doctest::Approx(0.85));
    CHECK(aggs[0].l1pct_mean == doctest::Approx(1.5));
    CHECK(aggs[0].count == 2);
    CHECK(aggs[0].psnr_inf == 0);

    CHECK(aggs[1].bucket == "regular");
    CHECK(aggs[1].psnr_mean == doctest::Approx(25.0));  // inf excluded
    CHECK(aggs[1].psnr_inf == 1);
    CHECK(aggs[1].count == 2);

    const std::string table = format_metric_table(aggs);
    CHECK(table.find("10-20") != std::string::npos);
    CHECK(table.find("regular") != std::string::npos);
    CHECK(table.find("infinite PSNR") != std::string::npos);

    CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
}

TEST_CASE("hole-only variants restrict to the hole") {
    auto gt = oracle::random_tensor<double>({3, 32, 32}, 13, 0.0, 1.0);
    const MaskSpec m = gen_regular_mask(32, 32, 0.25, 14);

    // prediction perfect in the hole, corrupted outside: hole-only metrics clean
    Tensor<double> pred = gt;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (m.at(y, x)) pred.at(c, y, x) += 0.2;
    CHECK(std::isinf(psnr_masked(gt, pred, m)));
    CHECK(l1_pct_masked(gt, pred, m) == 0.0);
    CHECK(std::isfinite(psnr(gt, pred)));

    // and the reverse: corruption only inside the hole
    Tensor<double> pred2 = gt;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (!m.at(y, x)) pred2.at(c, y, x) += 0.1;
    CHECK(psnr_masked(gt, pred2, m) == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(l1_pct_masked(gt, pred2, m) == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(ssim_masked(gt, pred2, m) < 1.0);
}

TEST_SUITE_END();
