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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fdi/tensor.hpp"

namespace fdi {

/// Spatial-domain image batches live in [-1,1], channel-first, RGB.
using ImageTensor = Tensor<float>;

struct LoadOptions {
    int target_size = 64;
    bool center_crop = false;  // CelebA-style square crop before resize; default off
};

/// Decode an 8-bit image, bilinear-resize to target_size x target_size and
/// map pixel values to [-1,1] via v/127.5 - 1. Grayscale inputs are
/// replicated to 3 channels.
ImageTensor load_image(const std::string& path, const LoadOptions& opts = {});

/// Inverse affine to [0,255] with round-half-away-from-zero, written as an
/// 8-bit PNG. Values are clamped to [-1,1] first.
void save_image(const ImageTensor& img, const std::string& path);

struct DatasetManifest {
    struct Item {
        std::string path;       // relative to root
        std::string split;      // train | val | test
        std::string mask_path;  // optional paired mask, empty if none
    };
    std::string root;
    std::vector<Item> items;

    std::vector<std::string> paths_for(const std::string& split) const;
    std::size_t count_for(const std::string& split) const;
};

/// Deterministic shuffled split of every image file under `root`.
/// `fractions` = (train, val, test) and must sum to 1.
DatasetManifest make_split(const std::string& root, std::array<double, 3> fractions,
                           std::uint64_t seed);

/// JSON-lines serialization: one {"path":..., "split":...} object per line.
void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

/// FNV-1a hash of the manifest's serialized bytes, as 16 hex digits.
std::string manifest_hash(const DatasetManifest& m);

/// Deterministic epoch shuffling: item indices grouped into batches, final
/// partial batch kept. Same (seed, epoch) always yields the same order.
std::vector<std::vector<int>> batch_indices(int n_items, int batch_size, std::uint64_t seed,
                                            int epoch);

/// All images of one split preloaded as [-1,1] tensors (desk-scale corpora
/// fit in memory comfortably).
struct ImageCache {
    std::vector<ImageTensor> images;
    std::vector<std::string> paths;

    static ImageCache from_manifest(const DatasetManifest& m, const std::string& split,
                                    const LoadOptions& opts = {});
};

}  // namespace fdi
