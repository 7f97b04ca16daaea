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

#include "fdi/masking.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fdi/rng.hpp"

namespace fs = std::filesystem;

namespace fdi {

const char* bucket_name(RatioBucket b) {
    switch (b) {
        case RatioBucket::b10_20: return "10-20";
        case RatioBucket::b20_30: return "20-30";
        case RatioBucket::b30_40: return "30-40";
        case RatioBucket::b40_50: return "40-50";
        case RatioBucket::b50_60: return "50-60";
        case RatioBucket::regular25: return "regular";
    }
    return "?";
}

std::optional<RatioBucket> bucket_from_name(const std::string& name) {
    for (RatioBucket b : {RatioBucket::b10_20, RatioBucket::b20_30, RatioBucket::b30_40,
                          RatioBucket::b40_50, RatioBucket::b50_60, RatioBucket::regular25}) {
        if (name == bucket_name(b)) return b;
    }
    if (name == "regular25") return RatioBucket::regular25;
    return std::nullopt;
}

std::pair<double, double> bucket_interval(RatioBucket b) {
    switch (b) {
        case RatioBucket::b10_20: return {0.1, 0.2};
        case RatioBucket::b20_30: return {0.2, 0.3};
        case RatioBucket::b30_40: return {0.3, 0.4};
        case RatioBucket::b40_50: return {0.4, 0.5};
        case RatioBucket::b50_60: return {0.5, 0.6};
        case RatioBucket::regular25: return {0.25, 0.25};
    }
    return {0, 0};
}

std::optional<RatioBucket> bucket_of_fraction(double frac) {
    for (RatioBucket b : {RatioBucket::b10_20, RatioBucket::b20_30, RatioBucket::b30_40,
                          RatioBucket::b40_50, RatioBucket::b50_60}) {
        auto [lo, hi] = bucket_interval(b);
        if (frac > lo && frac <= hi) return b;
    }
    return std::nullopt;
}

std::size_t MaskSpec::hole_count() const {
    std::size_t n = 0;
    for (std::uint8_t v : grid) n += (v == 0);
    return n;
}

double MaskSpec::hole_fraction() const {
    if (grid.empty()) return 0.0;
    return static_cast<double>(hole_count()) / static_cast<double>(grid.size());
}

MaskSpec gen_regular_mask(int h, int w, double ratio, std::uint64_t seed) {
    if (ratio <= 0.0 || ratio > 1.0) throw std::invalid_argument("gen_regular_mask: ratio out of (0,1]");
    const int side = static_cast<int>(std::lround(std::sqrt(ratio * h * w)));
    if (side > std::min(h, w))
        throw std::invalid_argument("gen_regular_mask: hole side " + std::to_string(side) +
                                    " does not fit inside " + std::to_string(h) + "x" + std::to_string(w));

    MaskSpec m;
    m.kind = MaskKind::regular;
    m.bucket = RatioBucket::regular25;
    m.height = h;
    m.width = w;
    m.grid.assign(static_cast<std::size_t>(h) * w, 1);

    auto rng = make_rng(seed);
    std::uniform_int_distribution<int> top_d(0, h - side), left_d(0, w - side);
    m.rect_top = top_d(rng);
    m.rect_left = left_d(rng);
    m.rect_h = m.rect_w = side;
    for (int y = m.rect_top; y < m.rect_top + side; ++y)
        for (int x = m.rect_left; x < m.rect_left + side; ++x) m.at(y, x) = 0;
    return m;
}

MaskSpec augment_mask(const MaskSpec& m, int quarter_turns, bool hflip) {
    MaskSpec src = m;
    if (m.height != m.width) {
        // rotations assume square grids; center-crop to square first
        const int side = std::min(m.height, m.width);
        const int top = (m.height - side) / 2, left = (m.width - side) / 2;
        MaskSpec cropped = m;
        cropped.height = cropped.width = side;
        cropped.grid.assign(static_cast<std::size_t>(side) * side, 1);
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) cropped.at(y, x) = m.at(top + y, left + x);
        src = cropped;
    }
    const int n = src.height;
    MaskSpec out = src;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            int sx = hflip ? (n - 1 - x) : x;
            int sy = y;
            for (int r = 0; r < (quarter_turns & 3); ++r) {
                // one clockwise quarter turn: dest(y,x) <- src(n-1-x, y)
                int ty = n - 1 - sx, tx = sy;
                sy = ty;
                sx = tx;
            }
            out.at(y, x) = src.at(sy, sx);
        }
    }
    return out;
}

namespace {

MaskSpec mask_from_mat(const cv::Mat& gray) {
    MaskSpec m;
    m.kind = MaskKind::irregular;
    m.height = gray.rows;
    m.width = gray.cols;
    m.grid.assign(static_cast<std::size_t>(gray.rows) * gray.cols, 1);
    for (int y = 0; y < gray.rows; ++y)
        for (int x = 0; x < gray.cols; ++x)
            m.at(y, x) = gray.at<std::uint8_t>(y, x) > 127 ? 0 : 1;  // white = hole on disk
    return m;
}

}  // namespace

MaskSpec load_mask_png(const std::string& path, int target_size) {
    cv::Mat gray = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (gray.empty()) throw std::runtime_error("load_mask_png: cannot decode " + path);
    if (target_size > 0 && (gray.rows != target_size || gray.cols != target_size))
        cv::resize(gray, gray, cv::Size(target_size, target_size), 0, 0, cv::INTER_NEAREST);
    MaskSpec m = mask_from_mat(gray);
    if (auto b = bucket_of_fraction(m.hole_fraction())) m.bucket = *b;
    return m;
}

std::vector<MaskSpec> load_irregular_masks(const std::string& dir, RatioBucket bucket,
                                           bool augment, int target_size) {
    if (bucket == RatioBucket::regular25)
        throw std::invalid_argument("load_irregular_masks: bucket must be an irregular interval");
    if (!fs::is_directory(dir)) throw std::runtime_error("load_irregular_masks: not a directory: " + dir);

    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());

    const auto [lo, hi] = bucket_interval(bucket);
    std::vector<MaskSpec> out;
    for (const auto& f : files) {
        cv::Mat gray = cv::imread(f, cv::IMREAD_GRAYSCALE);
        if (gray.empty()) {
            std::cerr << "warning: skipping unreadable mask " << f << "\n";
            continue;
        }
        if (target_size > 0 && (gray.rows != target_size || gray.cols != target_size))
            cv::resize(gray, gray, cv::Size(target_size, target_size), 0, 0, cv::INTER_NEAREST);
        MaskSpec base = mask_from_mat(gray);
        const double frac = base.hole_fraction();
        if (!(frac > lo && frac <= hi)) continue;
        base.bucket = bucket;
        if (augment) {
            for (int flip = 0; flip < 2; ++flip)
                for (int rot = 0; rot < 4; ++rot) {
                    MaskSpec v = augment_mask(base, rot, flip == 1);
                    v.bucket = bucket;
                    out.push_back(std::move(v));
                }
        } else {
            out.push_back(std::move(base));
        }
    }
    if (out.empty())
        throw std::runtime_error("load_irregular_masks: no mask in " + dir + " falls in bucket " +
                                 bucket_name(bucket));
    return out;
}

MaskSpec synth_stroke_mask(int h, int w, double target_fraction, std::uint64_t seed) {
    if (target_fraction <= 0.0 || target_fraction >= 1.0)
        throw std::invalid_argument("synth_stroke_mask: fraction out of (0,1)");
    MaskSpec m;
    m.kind = MaskKind::irregular;
    m.height = h;
    m.width = w;
    m.grid.assign(static_cast<std::size_t>(h) * w, 1);

    auto rng = make_rng(seed);
    std::uniform_int_distribution<int> ud_y(0, h - 1), ud_x(0, w - 1);
    std::uniform_real_distribution<double> ud_ang(0.0, 2.0 * M_PI);
    std::uniform_int_distribution<int> ud_len(std::max(2, h / 8), std::max(3, h / 2));
    std::uniform_int_distribution<int> ud_thick(1, std::max(1, h / 16));

    const std::size_t target = static_cast<std::size_t>(target_fraction * h * w);
    int guard = 0;
    while (m.hole_count() < target && guard++ < 10000) {
        double y = ud_y(rng), x = ud_x(rng);
        double ang = ud_ang(rng);
        int len = ud_len(rng), thick = ud_thick(rng);
        for (int s = 0; s < len; ++s) {
            int cy = static_cast<int>(y), cx = static_cast<int>(x);
            for (int dy = -thick; dy <= thick; ++dy)
                for (int dx = -thick; dx <= thick; ++dx) {
                    int py = cy + dy, px = cx + dx;
                    if (py >= 0 && py < h && px >= 0 && px < w && dy * dy + dx * dx <= thick * thick)
                        m.at(py, px) = 0;
                }
            y += std::sin(ang);
            x += std::cos(ang);
            if (y < 0 || y >= h || x < 0 || x >= w) break;
            if (m.hole_count() >= target) break;
        }
    }
    return m;
}

void save_mask_png(const MaskSpec& m, const std::string& path) {
    cv::Mat gray(m.height, m.width, CV_8UC1);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            gray.at<std::uint8_t>(y, x) = m.at(y, x) ? 0 : 255;  // white = hole
    if (!cv::imwrite(path, gray)) throw std::runtime_error("save_mask_png: cannot write " + path);
}

}  // namespace fdi
