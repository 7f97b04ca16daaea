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
#include <string>

#include "fdi/dataio.hpp"

namespace fdi {

/// Procedurally generated texture: a color ramp plus a few oriented
/// sinusoidal gratings (integer frequencies, random phase and color), in
/// [-1,1]. Stands in for a texture dataset at desk scale; the periodic
/// structure gives the frequency-domain stage a realistic signal to learn.
ImageTensor gen_texture(int size, std::uint64_t seed);

/// Write `count` textures as PNGs under `dir` (created if missing).
/// Returns the directory path.
std::string write_texture_corpus(const std::string& dir, int count, int size, std::uint64_t seed);

}  // namespace fdi
