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
#include <random>
#include <string>

namespace fdi {

// All randomness in the pipeline flows from one root seed; components draw
// their own generator through split_seed so that adding a consumer never
// shifts the stream of another.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derive a child seed from (root, component tag).
inline std::uint64_t split_seed(std::uint64_t root, const std::string& tag) {
    return splitmix64(root ^ fnv1a64(tag));
}

/// Derive a child seed from (root, component tag, index).
inline std::uint64_t split_seed(std::uint64_t root, const std::string& tag, std::uint64_t index) {
    return splitmix64(split_seed(root, tag) + 0x9e3779b97f4a7c15ULL * (index + 1));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace fdi
