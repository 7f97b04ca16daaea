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

#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fdi/masking.hpp"
#include "fdi/tensor.hpp"

namespace fdi {

/// Map a [-1,1] image to the [0,1] range all metrics are computed on.
template <typename T>
Tensor<T> to_unit_range(const Tensor<T>& img) {
    Tensor<T> out = img;
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = (std::clamp(out[i], T(-1), T(1)) + T(1)) / T(2);
    return out;
}

/// 10*log10(1/MSE) on [0,1] inputs; identical images give +infinity.
template <typename T>
double psnr(const Tensor<T>& gt, const Tensor<T>& pred) {
    check_same_shape(gt, pred, "psnr");
    double mse = 0;
    for (std::size_t i = 0; i < gt.numel(); ++i) {
        const double d = static_cast<double>(gt[i]) - static_cast<double>(pred[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(gt.numel());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

/// SSIM with the reference constants: 11x11 Gaussian window sigma 1.5,
/// K1 = 0.01, K2 = 0.03, L = 1, map averaged over valid window positions and
/// channels. Throws if the image is smaller than the window.
template <typename T>
double ssim(const Tensor<T>& gt, const Tensor<T>& pred) {
    check_same_shape(gt, pred, "ssim");
    if (gt.rank() != 3) throw std::invalid_argument("ssim: expected C x H x W");
    const int C = gt.dim(0), H = gt.dim(1), W = gt.dim(2);
    constexpr int win = 11;
    constexpr double sigma = 1.5, K1 = 0.01, K2 = 0.03, L = 1.0;
    if (H < win || W < win) throw std::invalid_argument("ssim: image smaller than window");
    const double C1 = (K1 * L) * (K1 * L), C2 = (K2 * L) * (K2 * L);

    double w[win][win];
    double wsum = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double dy = i - win / 2, dx = j - win / 2;
            w[i][j] = std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
            wsum += w[i][j];
        }
    for (auto& row : w)
        for (double& v : row) v /= wsum;

    double acc = 0;
    std::size_t count = 0;
    for (int c = 0; c < C; ++c)
        for (int y = 0; y + win <= H; ++y)
            for (int x = 0; x + win <= W; ++x) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double a = gt.at(c, y + i, x + j);
                        const double b = pred.at(c, y + i, x + j);
                        mx += w[i][j] * a;
                        my += w[i][j] * b;
                        mxx += w[i][j] * a * a;
                        myy += w[i][j] * b * b;
                        mxy += w[i][j] * a * b;
                    }
                const double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
                const double num = (2 * mx * my + C1) * (2 * cov + C2);
                const double den = (mx * mx + my * my + C1) * (vx + vy + C2);
                acc += num / den;
                ++count;
            }
    return acc / static_cast<double>(count);
}

/// 100 * mean |gt - pred| on [0,1] inputs.
template <typename T>
double l1_pct(const Tensor<T>& gt, const Tensor<T>& pred) {
    check_same_shape(gt, pred, "l1_pct");
    double acc = 0;
    for (std::size_t i = 0; i < gt.numel(); ++i)
        acc += std::abs(static_cast<double>(gt[i]) - static_cast<double>(pred[i]));
    return 100.0 * acc / static_cast<double>(gt.numel());
}

// ---- hole-restricted variants ----------------------------------------------
// Whether reported metrics cover the full image or only the hole is a
// reporting convention; the full image is the default, these back the
// --hole-only switch.

template <typename T>
double psnr_masked(const Tensor<T>& gt, const Tensor<T>& pred, const MaskSpec& m) {
    check_same_shape(gt, pred, "psnr_masked");
    double mse = 0;
    std::size_t count = 0;
    const int C = gt.dim(0);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (!m.at(y, x)) {
                    const double d =
                        static_cast<double>(gt.at(c, y, x)) - static_cast<double>(pred.at(c, y, x));
                    mse += d * d;
                    ++count;
                }
    if (count == 0 || mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / (mse / static_cast<double>(count)));
}

template <typename T>
double l1_pct_masked(const Tensor<T>& gt, const Tensor<T>& pred, const MaskSpec& m) {
    check_same_shape(gt, pred, "l1_pct_masked");
    double acc = 0;
    std::size_t count = 0;
    const int C = gt.dim(0);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (!m.at(y, x)) {
                    acc += std::abs(static_cast<double>(gt.at(c, y, x)) -
                                    static_cast<double>(pred.at(c, y, x)));
                    ++count;
                }
    return count ? 100.0 * acc / static_cast<double>(count) : 0.0;
}

/// SSIM averaged over valid windows whose center pixel lies in the hole.
template <typename T>
double ssim_masked(const Tensor<T>& gt, const Tensor<T>& pred, const MaskSpec& m) {
    check_same_shape(gt, pred, "ssim_masked");
    const int C = gt.dim(0), H = gt.dim(1), W = gt.dim(2);
    constexpr int win = 11;
    constexpr double sigma = 1.5, K1 = 0.01, K2 = 0.03, L = 1.0;
    if (H < win || W < win) throw std::invalid_argument("ssim_masked: image smaller than window");
    const double C1 = (K1 * L) * (K1 * L), C2 = (K2 * L) * (K2 * L);
    double w[win][win];
    double wsum = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double dy = i - win / 2, dx = j - win / 2;
            w[i][j] = std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
            wsum += w[i][j];
        }
    for (auto& row : w)
        for (double& v : row) v /= wsum;

    double acc = 0;
    std::size_t count = 0;
    for (int c = 0; c < C; ++c)
        for (int y = 0; y + win <= H; ++y)
            for (int x = 0; x + win <= W; ++x) {
                if (m.at(y + win / 2, x + win / 2)) continue;  // known center
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double a = gt.at(c, y + i, x + j);
                        const double b = pred.at(c, y + i, x + j);
                        mx += w[i][j] * a;
                        my += w[i][j] * b;
                        mxx += w[i][j] * a * a;
                        myy += w[i][j] * b * b;
                        mxy += w[i][j] * a * b;
                    }
                const double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
                acc += ((2 * mx * my + C1) * (2 * cov + C2)) /
                       ((mx * mx + my * my + C1) * (vx + vy + C2));
                ++count;
            }
    return count ? acc / static_cast<double>(count) : 1.0;
}

struct MetricRow {
    std::string item;    // image identifier
    std::string bucket;  // mask bucket name
    double psnr;
    double ssim;
    double l1pct;
};

struct BucketAggregate {
    std::string bucket;
    double psnr_mean;       // over finite entries only
    double ssim_mean;
    double l1pct_mean;
    std::size_t count;      // samples in the bucket
    std::size_t psnr_inf;   // identical pairs excluded from the PSNR mean
};

/// Arithmetic means per bucket; infinite PSNR entries are excluded from the
/// mean and counted separately. Empty input throws; buckets appear in first-
/// seen order.
std::vector<BucketAggregate> aggregate(const std::vector<MetricRow>& rows);

void write_metrics_csv(const std::vector<MetricRow>& rows,
                       const std::vector<BucketAggregate>& aggs, const std::string& path);

/// Aligned text table: one block per metric, one row per bucket.
std::string format_metric_table(const std::vector<BucketAggregate>& aggs);

}  // namespace fdi
