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

#include <map>
#include <string>

#include "fdi/layers.hpp"
#include "fdi/tensor.hpp"

namespace fdi {

/// Single-archive checkpoint: versioned binary header, a JSON metadata block
/// (layer chain, spectrum-scaling constant, free-form extras) and a
/// name -> float32 tensor map covering parameters and persistent buffers.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::string meta_json;  // arbitrary metadata, must at least hold {"chain": ...}
    std::map<std::string, Tensor<float>> tensors;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

/// Snapshot a network into a checkpoint (parameters + buffers).
Checkpoint snapshot_network(Sequential<float>& net, const std::string& meta_json);

/// Restore parameters and buffers into an already-built network with the
/// same chain. Throws on name or shape mismatch.
void restore_network(Sequential<float>& net, const Checkpoint& ckpt);

}  // namespace fdi
