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

#include "fdi/stage1.hpp"

namespace fdi {

/// Encoder (3 convs) + 8 residual blocks + decoder (2 transpose convs and an
/// output conv with tanh); instance norm and ReLU elsewhere. Printed sizes:
/// 9x64x64 in, 256x16x16 bottleneck, 3x64x64 out.
struct GeneratorArch {
    int in_ch = 9;
    int out_ch = 3;
    int base = 64;       // channels after the first conv; doubles twice
    int res_blocks = 8;
};

/// PatchGAN: stride-2 conv stack to an 6x6 probability map, LeakyReLU 0.2,
/// spectral norm on every conv weight, sigmoid head.
struct DiscriminatorArch {
    int in_ch = 3;
    int base = 64;
};

std::vector<LayerSpec> generator_chain(const GeneratorArch& arch);
std::vector<LayerSpec> discriminator_chain(const DiscriminatorArch& arch);

template <typename T>
Sequential<T> build_generator(const GeneratorArch& arch) {
    return Sequential<T>(generator_chain(arch));
}

template <typename T>
Sequential<T> build_discriminator(const DiscriminatorArch& arch) {
    return Sequential<T>(discriminator_chain(arch));
}

/// 9-channel generator input: masked image, mask replicated to 3 planes,
/// stage-1 guidance image (zeros when guidance is disabled).
Tensor<float> generator_input(const ImageTensor& in_img, const MaskSpec& m,
                              const ImageTensor& guide);

struct LossConfig {
    double lambda_l1 = 1.0;
    double lambda_adv = 0.1;
    bool non_saturating = true;  // -log D(fake); the literal min-max form is the flag off
    double log_eps = 1e-8;
};

/// Mean absolute difference over all elements.
template <typename T>
T l1_loss(const Tensor<T>& gt, const Tensor<T>& pred) {
    check_same_shape(gt, pred, "l1_loss");
    double acc = 0;
    for (std::size_t i = 0; i < gt.numel(); ++i)
        acc += std::abs(static_cast<double>(gt[i]) - static_cast<double>(pred[i]));
    return static_cast<T>(acc / static_cast<double>(gt.numel()));
}

template <typename T>
Tensor<T> l1_loss_grad(const Tensor<T>& gt, const Tensor<T>& pred) {
    check_same_shape(gt, pred, "l1_loss_grad");
    Tensor<T> g(pred.shape());
    const T scale = T(1) / static_cast<T>(pred.numel());
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const T d = pred[i] - gt[i];
        g[i] = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
    }
    return g;
}

struct AdvLosses {
    double d_loss;
    double g_loss;
};

/// d_loss = -mean log(real) - mean log(1-fake); g_loss = -mean log(fake)
/// (non-saturating) or mean log(1-fake) (literal form). Logs are
/// epsilon-guarded; scores are expected in (0,1).
AdvLosses adversarial_losses(const Tensor<float>& real_scores, const Tensor<float>& fake_scores,
                             const LossConfig& cfg = {});

/// Generator-phase adversarial loss value on the fake score map alone.
double g_adv_value(const Tensor<float>& fake_scores, const LossConfig& cfg);

/// dL_g/dfake for the generator phase.
Tensor<float> g_adv_grad(const Tensor<float>& fake_scores, const LossConfig& cfg);
/// dL_d/dreal and dL_d/dfake for the two halves of the discriminator loss.
Tensor<float> d_real_grad(const Tensor<float>& real_scores, const LossConfig& cfg);
Tensor<float> d_fake_grad(const Tensor<float>& fake_scores, const LossConfig& cfg);
/// (dL_d/dreal, dL_d/dfake) for the discriminator phase.
std::pair<Tensor<float>, Tensor<float>> d_loss_grads(const Tensor<float>& real_scores,
                                                     const Tensor<float>& fake_scores,
                                                     const LossConfig& cfg);

enum class AblationPreset { l1_only, l1_adv, full_dft };

const char* preset_name(AblationPreset p);
std::optional<AblationPreset> preset_from_name(const std::string& name);

struct Stage2Config {
    GeneratorArch gen;
    DiscriminatorArch disc;
    MaskConfig mask;
    double lr_g = 1e-4;
    double lr_d = 1e-5;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int batch_size = 14;
    int epochs = 100;
    int checkpoint_every = 1;
    PackLayout layout = PackLayout::real_imag;
    std::uint64_t seed = 0;
};

struct StepLog {
    int step;
    double l1;
    double g_adv;   // NaN when the arm has no adversarial term
    double d_loss;  // NaN likewise
};

struct Stage2Result {
    Sequential<float> generator;
    Sequential<float> discriminator;  // empty chain for l1_only
    std::vector<StepLog> log;
    bool has_discriminator = false;
};

/// Algorithm-1 training loop. `stage1_net` provides guidance for the
/// full_dft preset and must be null for the other arms (their guide planes
/// are zero). Writes stage2_G_epoch{E}.ckpt / stage2_D_epoch{E}.ckpt and
/// stage2_log.csv under out_dir ("" skips writing).
Stage2Result train_refinement(const std::vector<ImageTensor>& images,
                              Sequential<float>* stage1_net, bool stage1_residual,
                              const Stage2Config& cfg, const LossConfig& losses,
                              AblationPreset preset, const std::string& out_dir);

/// End-to-end inference: masked input -> stage-1 guidance (optional) ->
/// generator -> composite. Deterministic in eval mode.
ImageTensor inpaint(const ImageTensor& in_img, const MaskSpec& m, Sequential<float>* stage1_net,
                    bool stage1_residual, Sequential<float>& generator,
                    PackLayout layout = PackLayout::real_imag);

/// Stage-1 guidance image for one sample (zeros if stage1_net is null).
ImageTensor stage1_guidance(const ImageTensor& in_img, const MaskSpec& m,
                            Sequential<float>* stage1_net, bool stage1_residual,
                            PackLayout layout);

std::string stage2_meta_json(const Stage2Config& cfg, AblationPreset preset,
                             const std::string& which);
Sequential<float> load_generator(const std::string& ckpt_path, Stage2Config* cfg_out = nullptr,
                                 AblationPreset* preset_out = nullptr);

}  // namespace fdi
