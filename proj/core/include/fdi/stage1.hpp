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
#include <vector>

#include "fdi/dataio.hpp"
#include "fdi/layers.hpp"
#include "fdi/masking.hpp"
#include "fdi/spectral.hpp"

namespace fdi {

/// Frequency-domain deconvolution network: `depth` weight layers of 3x3
/// convolutions, ReLU after the first, BN+ReLU in between, bare conv last.
/// The printed architecture is depth 17, width 64, 12 -> 6 planes.
struct Stage1Arch {
    int depth = 17;
    int width = 64;
    int in_planes = 12;
    int out_planes = 6;
};

std::vector<LayerSpec> deconv_chain(const Stage1Arch& arch);

template <typename T>
Sequential<T> build_deconv_net(const Stage1Arch& arch) {
    return Sequential<T>(deconv_chain(arch));
}

struct MaskConfig {
    MaskKind kind = MaskKind::regular;
    double ratio = 0.25;             // regular masks
    std::vector<MaskSpec> pool;      // irregular masks, sampled per step
};

/// One mask per (seed) draw: regular masks are generated at the configured
/// ratio, irregular ones picked uniformly from the pool.
MaskSpec sample_mask(const MaskConfig& cfg, int h, int w, std::uint64_t seed);

struct Stage1Config {
    Stage1Arch arch;
    MaskConfig mask;
    double lr_hi = 1e-1;
    double lr_lo = 1e-4;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch_size = 128;
    int epochs = 50;
    int checkpoint_every = 1;
    bool residual_prediction = false;  // predict (target - masked spectrum) instead
    PackLayout layout = PackLayout::real_imag;
    std::uint64_t seed = 0;
};

// ---- spectrum plumbing between images and the network ----------------------

/// 2C scaled spectrum planes of an image (network-facing scale applied).
Tensor<float> packed_image_planes(const ImageTensor& img, PackLayout layout);

/// Network input: packed spectrum of the masked image (6 planes) followed by
/// the packed spectrum of the mask replicated to 3 channels (6 planes).
Tensor<float> stage1_input_planes(const ImageTensor& masked, const MaskSpec& m, PackLayout layout);

/// Training target: packed + scaled spectrum of the clean image (6 planes).
Tensor<float> stage1_target_planes(const ImageTensor& gt, PackLayout layout);

/// Stack single-sample C x H x W tensors into N x C x H x W.
Tensor<float> stack_batch(const std::vector<Tensor<float>>& samples);

/// Forward through the deconvolution net; with residual prediction the net
/// output is added to the masked-image spectrum planes.
Tensor<float> stage1_forward(Sequential<float>& net, const Tensor<float>& input, bool train,
                             bool residual_prediction = false);

/// Mean squared difference over all planes and pixels.
template <typename T>
T stage1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    check_same_shape(pred, target, "stage1_loss");
    double acc = 0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        acc += d * d;
    }
    return static_cast<T>(acc / static_cast<double>(pred.numel()));
}

/// dL/dpred of stage1_loss.
template <typename T>
Tensor<T> stage1_loss_grad(const Tensor<T>& pred, const Tensor<T>& target) {
    check_same_shape(pred, target, "stage1_loss_grad");
    Tensor<T> g(pred.shape());
    const T scale = T(2) / static_cast<T>(pred.numel());
    for (std::size_t i = 0; i < pred.numel(); ++i) g[i] = scale * (pred[i] - target[i]);
    return g;
}

/// Undo network scaling, unpack, inverse transform, clamp to [-1,1].
/// Accepts a single sample (6 x H x W).
ImageTensor reconstruct_stage1(const Tensor<float>& packed_planes, PackLayout layout);

struct EpochLog {
    int epoch;
    double loss;
    double lr;
};

struct Stage1Result {
    Sequential<float> net;
    std::vector<EpochLog> log;
};

/// SGD training per the stage-1 recipe; writes stage1_epoch{E}.ckpt files and
/// stage1_log.csv under out_dir (pass "" to skip writing). Aborts with
/// NumericError if the loss turns non-finite.
Stage1Result train_stage1(const std::vector<ImageTensor>& images, const Stage1Config& cfg,
                          const std::string& out_dir);

/// Metadata JSON stored in stage-1 checkpoints.
std::string stage1_meta_json(const Stage1Config& cfg, int h, int w);

/// Rebuild a stage-1 network from a checkpoint file.
Sequential<float> load_stage1_net(const std::string& ckpt_path, Stage1Config* cfg_out = nullptr);

}  // namespace fdi
