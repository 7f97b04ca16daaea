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

#include "fdi/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fdi/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fdi {

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::string serialize_manifest(const DatasetManifest& m) {
    std::ostringstream os;
    for (const auto& it : m.items) {
        json j{{"path", it.path}, {"split", it.split}};
        if (!it.mask_path.empty()) j["mask"] = it.mask_path;
        os << j.dump() << "\n";
    }
    return os.str();
}

}  // namespace

ImageTensor load_image(const std::string& path, const LoadOptions& opts) {
    cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);  // BGR, grayscale replicated
    if (img.empty()) throw std::runtime_error("load_image: cannot decode " + path);
    if (opts.center_crop && img.rows != img.cols) {
        const int side = std::min(img.rows, img.cols);
        const int top = (img.rows - side) / 2, left = (img.cols - side) / 2;
        img = img(cv::Rect(left, top, side, side)).clone();
    }
    if (opts.target_size > 0 && (img.rows != opts.target_size || img.cols != opts.target_size))
        cv::resize(img, img, cv::Size(opts.target_size, opts.target_size), 0, 0, cv::INTER_LINEAR);

    ImageTensor out({3, img.rows, img.cols});
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x) {
            const cv::Vec3b& bgr = img.at<cv::Vec3b>(y, x);
            out.at(0, y, x) = static_cast<float>(bgr[2]) / 127.5f - 1.0f;  // R
            out.at(1, y, x) = static_cast<float>(bgr[1]) / 127.5f - 1.0f;  // G
            out.at(2, y, x) = static_cast<float>(bgr[0]) / 127.5f - 1.0f;  // B
        }
    return out;
}

void save_image(const ImageTensor& img, const std::string& path) {
    if (img.rank() != 3 || (img.dim(0) != 3 && img.dim(0) != 1))
        throw std::invalid_argument("save_image: expected 1- or 3-channel C x H x W");
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    cv::Mat out(H, W, CV_8UC3);
    auto to_u8 = [](float v) {
        v = std::clamp(v, -1.0f, 1.0f);
        const float scaled = (v + 1.0f) * 127.5f;
        // round half away from zero
        return static_cast<std::uint8_t>(std::clamp(std::round(scaled), 0.0f, 255.0f));
    };
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const std::uint8_t r = to_u8(img.at(0, y, x));
            const std::uint8_t g = to_u8(img.at(C == 3 ? 1 : 0, y, x));
            const std::uint8_t b = to_u8(img.at(C == 3 ? 2 : 0, y, x));
            out.at<cv::Vec3b>(y, x) = cv::Vec3b(b, g, r);
        }
    if (!cv::imwrite(path, out)) throw std::runtime_error("save_image: cannot write " + path);
}

std::vector<std::string> DatasetManifest::paths_for(const std::string& split) const {
    std::vector<std::string> out;
    for (const auto& it : items)
        if (it.split == split) out.push_back((fs::path(root) / it.path).string());
    return out;
}

std::size_t DatasetManifest::count_for(const std::string& split) const {
    std::size_t n = 0;
    for (const auto& it : items) n += (it.split == split);
    return n;
}

DatasetManifest make_split(const std::string& root, std::array<double, 3> fractions,
                           std::uint64_t seed) {
    const double total = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("make_split: fractions must sum to 1");
    if (!fs::is_directory(root)) throw std::runtime_error("make_split: not a directory: " + root);

    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && is_image_file(e.path()))
            files.push_back(fs::relative(e.path(), root).generic_string());
    if (files.empty()) throw std::runtime_error("make_split: no images under " + root);
    std::sort(files.begin(), files.end());

    auto rng = make_rng(split_seed(seed, "dataio.split"));
    std::shuffle(files.begin(), files.end(), rng);

    const std::size_t n = files.size();
    const std::size_t n_train = static_cast<std::size_t>(std::llround(fractions[0] * n));
    const std::size_t n_val = static_cast<std::size_t>(std::llround(fractions[1] * n));

    DatasetManifest m;
    m.root = root;
    for (std::size_t i = 0; i < n; ++i) {
        const char* split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
        m.items.push_back({files[i], split, ""});
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_manifest: cannot write " + path);
    os << serialize_manifest(m);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_manifest: cannot read " + path);
    DatasetManifest m;
    m.root = fs::path(path).parent_path().string();
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        DatasetManifest::Item it;
        it.path = j.at("path").get<std::string>();
        it.split = j.at("split").get<std::string>();
        if (j.contains("mask")) it.mask_path = j["mask"].get<std::string>();
        m.items.push_back(std::move(it));
    }
    if (m.items.empty()) throw std::runtime_error("load_manifest: empty manifest " + path);
    return m;
}

std::string manifest_hash(const DatasetManifest& m) {
    const std::uint64_t h = fnv1a64(serialize_manifest(m));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<std::vector<int>> batch_indices(int n_items, int batch_size, std::uint64_t seed,
                                            int epoch) {
    if (n_items <= 0) throw std::invalid_argument("batch_indices: empty split");
    if (batch_size <= 0) throw std::invalid_argument("batch_indices: batch_size must be positive");
    std::vector<int> order(n_items);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(split_seed(seed, "dataio.batches", static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::vector<int>> batches;
    for (int i = 0; i < n_items; i += batch_size) {
        const int end = std::min(i + batch_size, n_items);
        batches.emplace_back(order.begin() + i, order.begin() + end);
    }
    return batches;
}

ImageCache ImageCache::from_manifest(const DatasetManifest& m, const std::string& split,
                                     const LoadOptions& opts) {
    ImageCache cache;
    for (const auto& path : m.paths_for(split)) {
        cache.images.push_back(load_image(path, opts));
        cache.paths.push_back(path);
    }
    if (cache.images.empty())
        throw std::runtime_error("ImageCache: split '" + split + "' is empty");
    return cache;
}

}  // namespace fdi
