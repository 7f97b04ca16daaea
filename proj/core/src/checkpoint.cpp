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

#include "fdi/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace fdi {

namespace {

constexpr char kMagic[8] = {'F', 'D', 'I', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const auto len = read_pod<std::uint64_t>(is);
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(os, kVersion);
    write_string(os, meta_json);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        write_string(os, name);
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) write_pod<std::int32_t>(os, t.dim(i));
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot read " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.meta_json = read_string(is);
    const auto n = read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::string name = read_string(is);
        const auto rank = read_pod<std::uint32_t>(is);
        std::vector<int> shape(rank);
        for (auto& d : shape) d = read_pod<std::int32_t>(is);
        Tensor<float> t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!is) throw std::runtime_error("checkpoint: truncated tensor " + name);
        ckpt.tensors.emplace(name, std::move(t));
    }
    return ckpt;
}

Checkpoint snapshot_network(Sequential<float>& net, const std::string& meta_json) {
    Checkpoint ckpt;
    ckpt.meta_json = meta_json;
    for (const auto& p : net.params()) ckpt.tensors.emplace(p.name, *p.value);
    for (const auto& b : net.buffers()) ckpt.tensors.emplace(b.name, *b.value);
    return ckpt;
}

void restore_network(Sequential<float>& net, const Checkpoint& ckpt) {
    for (auto& p : net.params()) {
        auto it = ckpt.tensors.find(p.name);
        if (it == ckpt.tensors.end())
            throw std::runtime_error("checkpoint: missing tensor " + p.name);
        if (it->second.shape() != p.value->shape())
            throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
        *p.value = it->second;
    }
    // buffers: running statistics and power-iteration state
    for (std::size_t i = 0; i < net.size(); ++i) {
        std::vector<ParamRef<float>> bufs;
        net.layer(i).collect_buffers("layer" + std::to_string(i), bufs);
        Tensor<float> sn_u, sn_v;
        bool has_sn = false;
        for (auto& b : bufs) {
            auto it = ckpt.tensors.find(b.name);
            if (it == ckpt.tensors.end()) continue;
            if (b.name.ends_with(".sn_u")) {
                sn_u = it->second;
                has_sn = true;
            } else if (b.name.ends_with(".sn_v")) {
                sn_v = it->second;
            } else {
                if (it->second.shape() != b.value->shape())
                    throw std::runtime_error("checkpoint: shape mismatch for " + b.name);
                *b.value = it->second;
            }
        }
        if (has_sn)
            if (auto* conv = dynamic_cast<Conv2d<float>*>(&net.layer(i)))
                conv->restore_sn_state(sn_u, sn_v);
    }
}

}  // namespace fdi
