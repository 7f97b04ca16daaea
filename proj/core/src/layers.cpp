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

#include "fdi/layers.hpp"

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace fdi {

LayerSpec conv_spec(int in_ch, int out_ch, int kernel, int stride, int padding,
                    bool spectral_norm) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    s.spectral_norm = spectral_norm;
    return s;
}

LayerSpec tconv_spec(int in_ch, int out_ch, int kernel, int stride, int padding) {
    LayerSpec s = conv_spec(in_ch, out_ch, kernel, stride, padding);
    s.kind = LayerKind::transpose_conv;
    return s;
}

LayerSpec batch_norm_spec(int ch) {
    LayerSpec s;
    s.kind = LayerKind::batch_norm;
    s.in_ch = s.out_ch = ch;
    return s;
}

LayerSpec instance_norm_spec(int ch) {
    LayerSpec s;
    s.kind = LayerKind::instance_norm;
    s.in_ch = s.out_ch = ch;
    return s;
}

LayerSpec relu_spec() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
}

LayerSpec leaky_relu_spec(double slope) {
    LayerSpec s;
    s.kind = LayerKind::leaky_relu;
    s.slope = slope;
    return s;
}

LayerSpec tanh_spec() {
    LayerSpec s;
    s.kind = LayerKind::tanh_act;
    return s;
}

LayerSpec sigmoid_spec() {
    LayerSpec s;
    s.kind = LayerKind::sigmoid_act;
    return s;
}

LayerSpec residual_block_spec(int ch, NormKind norm, int kernel) {
    LayerSpec s;
    s.kind = LayerKind::residual_block;
    s.in_ch = s.out_ch = ch;
    s.kernel = kernel;
    s.stride = 1;
    s.padding = kernel / 2;
    s.normalizer = norm;
    return s;
}

int conv_out_size(int in, int k, int s, int p) {
    const int span = in + 2 * p - k;
    if (span < 0) throw std::invalid_argument("conv_out_size: kernel exceeds padded input");
    if (s > 1 && span % s != 0)
        throw std::invalid_argument("conv_out_size: layer output size is not integral");
    return span / s + 1;
}

int tconv_out_size(int in, int k, int s, int p) {
    const int out = (in - 1) * s - 2 * p + k;
    if (out <= 0) throw std::invalid_argument("tconv_out_size: vanishing output");
    return out;
}

std::array<int, 3> shape_of(const LayerSpec& spec, std::array<int, 3> in) {
    auto [c, h, w] = in;
    switch (spec.kind) {
        case LayerKind::conv:
            if (c != spec.in_ch)
                throw std::invalid_argument("shape_of: conv expects " + std::to_string(spec.in_ch) +
                                            " channels, got " + std::to_string(c));
            return {spec.out_ch, conv_out_size(h, spec.kernel, spec.stride, spec.padding),
                    conv_out_size(w, spec.kernel, spec.stride, spec.padding)};
        case LayerKind::transpose_conv:
            if (c != spec.in_ch)
                throw std::invalid_argument("shape_of: transpose conv channel mismatch");
            return {spec.out_ch, tconv_out_size(h, spec.kernel, spec.stride, spec.padding),
                    tconv_out_size(w, spec.kernel, spec.stride, spec.padding)};
        case LayerKind::batch_norm:
        case LayerKind::instance_norm:
            if (c != spec.in_ch) throw std::invalid_argument("shape_of: norm channel mismatch");
            return in;
        case LayerKind::residual_block:
            if (c != spec.in_ch)
                throw std::invalid_argument("shape_of: residual block channel mismatch");
            return in;
        default:
            return in;  // activations preserve shape
    }
}

std::array<int, 3> shape_of(const std::vector<LayerSpec>& chain, std::array<int, 3> in) {
    for (const auto& s : chain) in = shape_of(s, in);
    return in;
}

std::vector<std::array<int, 3>> shape_trace(const std::vector<LayerSpec>& chain,
                                            std::array<int, 3> in) {
    std::vector<std::array<int, 3>> out{in};
    for (const auto& s : chain) {
        in = shape_of(s, in);
        out.push_back(in);
    }
    return out;
}

std::size_t param_count(const std::vector<LayerSpec>& chain) {
    std::size_t n = 0;
    for (const auto& s : chain) {
        switch (s.kind) {
            case LayerKind::conv:
            case LayerKind::transpose_conv:
                n += static_cast<std::size_t>(s.in_ch) * s.out_ch * s.kernel * s.kernel + s.out_ch;
                break;
            case LayerKind::batch_norm:
                n += 2 * static_cast<std::size_t>(s.in_ch);
                break;
            case LayerKind::residual_block: {
                std::size_t conv = static_cast<std::size_t>(s.in_ch) * s.in_ch * s.kernel * s.kernel +
                                   s.in_ch;
                n += 2 * conv;
                if (s.normalizer == NormKind::batch) n += 4 * static_cast<std::size_t>(s.in_ch);
                break;
            }
            default: break;
        }
    }
    return n;
}

namespace {

const char* kind_str(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::transpose_conv: return "transpose_conv";
        case LayerKind::batch_norm: return "batch_norm";
        case LayerKind::instance_norm: return "instance_norm";
        case LayerKind::relu: return "relu";
        case LayerKind::leaky_relu: return "leaky_relu";
        case LayerKind::tanh_act: return "tanh";
        case LayerKind::sigmoid_act: return "sigmoid";
        case LayerKind::residual_block: return "residual_block";
    }
    return "?";
}

LayerKind kind_from_str(const std::string& s) {
    for (LayerKind k : {LayerKind::conv, LayerKind::transpose_conv, LayerKind::batch_norm,
                        LayerKind::instance_norm, LayerKind::relu, LayerKind::leaky_relu,
                        LayerKind::tanh_act, LayerKind::sigmoid_act, LayerKind::residual_block})
        if (s == kind_str(k)) return k;
    throw std::invalid_argument("unknown layer kind: " + s);
}

const char* norm_str(NormKind k) {
    switch (k) {
        case NormKind::none: return "none";
        case NormKind::batch: return "batch";
        case NormKind::instance: return "instance";
    }
    return "?";
}

NormKind norm_from_str(const std::string& s) {
    if (s == "none") return NormKind::none;
    if (s == "batch") return NormKind::batch;
    if (s == "instance") return NormKind::instance;
    throw std::invalid_argument("unknown norm kind: " + s);
}

}  // namespace

std::string layer_spec_to_json(const std::vector<LayerSpec>& chain) {
    json arr = json::array();
    for (const auto& s : chain) {
        arr.push_back(json{{"kind", kind_str(s.kind)},
                           {"kernel", s.kernel},
                           {"stride", s.stride},
                           {"padding", s.padding},
                           {"in_ch", s.in_ch},
                           {"out_ch", s.out_ch},
                           {"normalizer", norm_str(s.normalizer)},
                           {"spectral_norm", s.spectral_norm},
                           {"slope", s.slope}});
    }
    return arr.dump();
}

std::vector<LayerSpec> layer_spec_from_json(const std::string& text) {
    json arr = json::parse(text);
    std::vector<LayerSpec> chain;
    for (const auto& j : arr) {
        LayerSpec s;
        s.kind = kind_from_str(j.at("kind").get<std::string>());
        s.kernel = j.at("kernel").get<int>();
        s.stride = j.at("stride").get<int>();
        s.padding = j.at("padding").get<int>();
        s.in_ch = j.at("in_ch").get<int>();
        s.out_ch = j.at("out_ch").get<int>();
        s.normalizer = norm_from_str(j.at("normalizer").get<std::string>());
        s.spectral_norm = j.at("spectral_norm").get<bool>();
        s.slope = j.at("slope").get<double>();
        chain.push_back(s);
    }
    return chain;
}

}  // namespace fdi
