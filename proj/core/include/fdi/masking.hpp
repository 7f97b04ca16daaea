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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdi/tensor.hpp"

namespace fdi {

enum class MaskKind { regular, irregular };

/// Hole-area buckets used to stratify evaluation. Interval semantics are
/// lo < fraction <= hi.
enum class RatioBucket { b10_20, b20_30, b30_40, b40_50, b50_60, regular25 };

const char* bucket_name(RatioBucket b);
std::optional<RatioBucket> bucket_from_name(const std::string& name);
/// [lo, hi] hole-fraction interval of an irregular bucket.
std::pair<double, double> bucket_interval(RatioBucket b);
/// Bucket containing the given hole fraction, if any.
std::optional<RatioBucket> bucket_of_fraction(double frac);

/// Binary mask over an H x W grid. Multiplicative convention: grid == 1 marks
/// a known pixel, grid == 0 a hole, so that I_in = I_gt * M holds literally.
struct MaskSpec {
    MaskKind kind = MaskKind::regular;
    RatioBucket bucket = RatioBucket::regular25;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> grid;  // 1 = known, 0 = hole

    // Hole rectangle, regular masks only: top-left corner and size.
    int rect_top = 0, rect_left = 0, rect_h = 0, rect_w = 0;

    std::uint8_t& at(int y, int x) { return grid[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return grid[static_cast<std::size_t>(y) * width + x]; }

    std::size_t hole_count() const;
    double hole_fraction() const;
};

/// Randomly placed square hole covering `ratio` of the pixels.
/// side = round(sqrt(ratio*h*w)); throws if the square does not fit.
MaskSpec gen_regular_mask(int h, int w, double ratio, std::uint64_t seed);

/// Load grayscale mask images from a directory, binarize (threshold 127,
/// white = hole on disk), convert to the 1 = known convention and keep those
/// whose measured hole fraction falls in `bucket`. With `augment`, each mask
/// contributes its 4 rotations x {identity, horizontal flip}.
/// `target_size` > 0 resizes with nearest neighbour before binarization.
std::vector<MaskSpec> load_irregular_masks(const std::string& dir, RatioBucket bucket,
                                           bool augment, int target_size = 0);

/// Load one grayscale mask image (white = hole on disk), optionally resized
/// with nearest neighbour. Bucket is set from the measured hole fraction.
MaskSpec load_mask_png(const std::string& path, int target_size = 0);

/// Synthetic free-form mask made of random thick strokes, aimed at the given
/// hole fraction. Desk-scale stand-in for an external irregular mask dataset.
MaskSpec synth_stroke_mask(int h, int w, double target_fraction, std::uint64_t seed);

/// Write a mask as an 8-bit grayscale PNG (white = hole, the on-disk
/// convention accepted by load_irregular_masks).
void save_mask_png(const MaskSpec& m, const std::string& path);

/// Rotate by 0/90/180/270 degrees and optionally flip horizontally first.
MaskSpec augment_mask(const MaskSpec& m, int quarter_turns, bool hflip);

/// Mask as a C x H x W tensor of 0/1 values.
template <typename T>
Tensor<T> mask_tensor(const MaskSpec& m, int channels) {
    Tensor<T> out({channels, m.height, m.width});
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) out.at(c, y, x) = static_cast<T>(m.at(y, x));
    return out;
}

/// I_in = img * M: known pixels preserved exactly, hole pixels zeroed.
template <typename T>
Tensor<T> apply_mask(const Tensor<T>& img, const MaskSpec& m) {
    if (img.rank() != 3 || img.dim(1) != m.height || img.dim(2) != m.width)
        throw std::invalid_argument("apply_mask: image/mask shape mismatch");
    Tensor<T> out = img;
    const int C = img.dim(0);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (!m.at(y, x)) out.at(c, y, x) = T(0);
    return out;
}

/// I_pred = I_in + I2_pred * (1-M), realized as a per-pixel select so known
/// pixels come from in_img bit-exactly and hole pixels from pred bit-exactly.
template <typename T>
Tensor<T> composite(const Tensor<T>& in_img, const Tensor<T>& pred, const MaskSpec& m) {
    check_same_shape(in_img, pred, "composite");
    if (in_img.rank() != 3 || in_img.dim(1) != m.height || in_img.dim(2) != m.width)
        throw std::invalid_argument("composite: image/mask shape mismatch");
    Tensor<T> out = in_img;
    const int C = in_img.dim(0);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (!m.at(y, x)) out.at(c, y, x) = pred.at(c, y, x);
    return out;
}

}  // namespace fdi
