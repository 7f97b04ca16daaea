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

#include "fdi/synth.hpp"

#include <cmath>
#include <filesystem>
#include <random>

#include "fdi/rng.hpp"

namespace fs = std::filesystem;

namespace fdi {

ImageTensor gen_texture(int size, std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::uniform_int_distribution<int> freq_d(1, 10);
    std::uniform_int_distribution<int> n_gratings_d(2, 4);
    std::uniform_real_distribution<float> phase_d(0.0f, 2.0f * static_cast<float>(M_PI));
    std::uniform_real_distribution<float> amp_d(0.25f, 0.6f);
    std::uniform_real_distribution<float> base_d(-0.35f, 0.35f);
    std::uniform_real_distribution<float> ramp_d(-0.3f, 0.3f);
    std::uniform_real_distribution<float> mix_d(0.0f, 1.0f);

    struct Grating {
        int fx, fy;
        float phase, amp;
        float color[3];
    };
    const int n = n_gratings_d(rng);
    std::vector<Grating> gratings(n);
    for (auto& g : gratings) {
        g.fx = freq_d(rng) * (mix_d(rng) < 0.5f ? 1 : -1);
        g.fy = freq_d(rng);
        if (mix_d(rng) < 0.2f) g.fx = 0;  // axis-aligned stripes now and then
        g.phase = phase_d(rng);
        g.amp = amp_d(rng);
        for (float& c : g.color) c = 0.5f + 0.5f * mix_d(rng);
    }
    float base[3], ramp_x[3], ramp_y[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = base_d(rng);
        ramp_x[c] = ramp_d(rng);
        ramp_y[c] = ramp_d(rng);
    }

    ImageTensor img({3, size, size});
    const float inv = 1.0f / static_cast<float>(size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            float wave = 0.0f;
            float per_chan[3] = {0, 0, 0};
            for (const auto& g : gratings) {
                wave = g.amp * std::cos(2.0f * static_cast<float>(M_PI) *
                                            (g.fx * x * inv + g.fy * y * inv) +
                                        g.phase);
                for (int c = 0; c < 3; ++c) per_chan[c] += wave * g.color[c];
            }
            for (int c = 0; c < 3; ++c) {
                const float v = base[c] + ramp_x[c] * (2.0f * x * inv - 1.0f) +
                                ramp_y[c] * (2.0f * y * inv - 1.0f) + per_chan[c];
                img.at(c, y, x) = std::clamp(v, -1.0f, 1.0f);
            }
        }
    return img;
}

std::string write_texture_corpus(const std::string& dir, int count, int size,
                                 std::uint64_t seed) {
    fs::create_directories(dir);
    for (int i = 0; i < count; ++i) {
        const ImageTensor img = gen_texture(size, split_seed(seed, "synth.texture", i));
        char name[32];
        std::snprintf(name, sizeof(name), "tex_%05d.png", i);
        save_image(img, (fs::path(dir) / name).string());
    }
    return dir;
}

}  // namespace fdi
