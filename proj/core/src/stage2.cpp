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

#include "fdi/stage2.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fdi/checkpoint.hpp"
#include "fdi/errors.hpp"
#include "fdi/optim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fdi {

std::vector<LayerSpec> generator_chain(const GeneratorArch& a) {
    const int c1 = a.base, c2 = 2 * a.base, c3 = 4 * a.base;
    std::vector<LayerSpec> chain;
    // encoder
    chain.push_back(conv_spec(a.in_ch, c1, 7, 1, 3));
    chain.push_back(instance_norm_spec(c1));
    chain.push_back(relu_spec());
    chain.push_back(conv_spec(c1, c2, 4, 2, 1));
    chain.push_back(instance_norm_spec(c2));
    chain.push_back(relu_spec());
    chain.push_back(conv_spec(c2, c3, 4, 2, 1));
    chain.push_back(instance_norm_spec(c3));
    chain.push_back(relu_spec());
    // residual trunk
    for (int i = 0; i < a.res_blocks; ++i)
        chain.push_back(residual_block_spec(c3, NormKind::instance, 3));
    // decoder
    chain.push_back(tconv_spec(c3, c2, 4, 2, 1));
    chain.push_back(instance_norm_spec(c2));
    chain.push_back(relu_spec());
    chain.push_back(tconv_spec(c2, c1, 4, 2, 1));
    chain.push_back(instance_norm_spec(c1));
    chain.push_back(relu_spec());
    chain.push_back(conv_spec(c1, a.out_ch, 7, 1, 3));
    chain.push_back(tanh_spec());
    return chain;
}

std::vector<LayerSpec> discriminator_chain(const DiscriminatorArch& a) {
    const int c1 = a.base, c2 = 2 * a.base, c3 = 4 * a.base, c4 = 8 * a.base;
    std::vector<LayerSpec> chain;
    chain.push_back(conv_spec(a.in_ch, c1, 4, 2, 1, /*spectral_norm=*/true));
    chain.push_back(leaky_relu_spec(0.2));
    chain.push_back(conv_spec(c1, c2, 4, 2, 1, true));
    chain.push_back(leaky_relu_spec(0.2));
    chain.push_back(conv_spec(c2, c3, 4, 2, 1, true));
    chain.push_back(leaky_relu_spec(0.2));
    chain.push_back(conv_spec(c3, c4, 4, 1, 1, true));
    chain.push_back(leaky_relu_spec(0.2));
    chain.push_back(conv_spec(c4, 1, 4, 1, 1, true));
    chain.push_back(sigmoid_spec());
    return chain;
}

Tensor<float> generator_input(const ImageTensor& in_img, const MaskSpec& m,
                              const ImageTensor& guide) {
    check_same_shape(in_img, guide, "generator_input");
    const int C = in_img.dim(0), H = in_img.dim(1), W = in_img.dim(2);
    Tensor<float> out({3 * C, H, W});
    std::copy(in_img.data(), in_img.data() + in_img.numel(), out.data());
    const Tensor<float> m3 = mask_tensor<float>(m, C);
    std::copy(m3.data(), m3.data() + m3.numel(), out.data() + in_img.numel());
    std::copy(guide.data(), guide.data() + guide.numel(), out.data() + 2 * in_img.numel());
    return out;
}

AdvLosses adversarial_losses(const Tensor<float>& real_scores, const Tensor<float>& fake_scores,
                             const LossConfig& cfg) {
    const double eps = cfg.log_eps;
    double d_real = 0, d_fake = 0, g = 0;
    for (std::size_t i = 0; i < real_scores.numel(); ++i)
        d_real -= std::log(std::max(static_cast<double>(real_scores[i]), eps));
    d_real /= static_cast<double>(real_scores.numel());
    for (std::size_t i = 0; i < fake_scores.numel(); ++i) {
        const double f = fake_scores[i];
        d_fake -= std::log(std::max(1.0 - f, eps));
        g += cfg.non_saturating ? -std::log(std::max(f, eps)) : std::log(std::max(1.0 - f, eps));
    }
    d_fake /= static_cast<double>(fake_scores.numel());
    g /= static_cast<double>(fake_scores.numel());
    return {d_real + d_fake, g};
}

double g_adv_value(const Tensor<float>& fake_scores, const LossConfig& cfg) {
    double g = 0;
    for (std::size_t i = 0; i < fake_scores.numel(); ++i) {
        const double f = fake_scores[i];
        g += cfg.non_saturating ? -std::log(std::max(f, cfg.log_eps))
                                : std::log(std::max(1.0 - f, cfg.log_eps));
    }
    return g / static_cast<double>(fake_scores.numel());
}

Tensor<float> g_adv_grad(const Tensor<float>& fake_scores, const LossConfig& cfg) {
    Tensor<float> grad(fake_scores.shape());
    const double n = static_cast<double>(fake_scores.numel());
    for (std::size_t i = 0; i < grad.numel(); ++i) {
        const double f = fake_scores[i];
        grad[i] = cfg.non_saturating
                      ? static_cast<float>(-1.0 / (std::max(f, cfg.log_eps) * n))
                      : static_cast<float>(-1.0 / (std::max(1.0 - f, cfg.log_eps) * n));
    }
    return grad;
}

Tensor<float> d_real_grad(const Tensor<float>& real_scores, const LossConfig& cfg) {
    Tensor<float> dr(real_scores.shape());
    const double n = static_cast<double>(real_scores.numel());
    for (std::size_t i = 0; i < dr.numel(); ++i)
        dr[i] = static_cast<float>(
            -1.0 / (std::max(static_cast<double>(real_scores[i]), cfg.log_eps) * n));
    return dr;
}

Tensor<float> d_fake_grad(const Tensor<float>& fake_scores, const LossConfig& cfg) {
    Tensor<float> df(fake_scores.shape());
    const double n = static_cast<double>(fake_scores.numel());
    for (std::size_t i = 0; i < df.numel(); ++i)
        df[i] = static_cast<float>(
            1.0 / (std::max(1.0 - static_cast<double>(fake_scores[i]), cfg.log_eps) * n));
    return df;
}

std::pair<Tensor<float>, Tensor<float>> d_loss_grads(const Tensor<float>& real_scores,
                                                     const Tensor<float>& fake_scores,
                                                     const LossConfig& cfg) {
    return {d_real_grad(real_scores, cfg), d_fake_grad(fake_scores, cfg)};
}

const char* preset_name(AblationPreset p) {
    switch (p) {
        case AblationPreset::l1_only: return "l1_only";
        case AblationPreset::l1_adv: return "l1_adv";
        case AblationPreset::full_dft: return "full_dft";
    }
    return "?";
}

std::optional<AblationPreset> preset_from_name(const std::string& name) {
    for (auto p : {AblationPreset::l1_only, AblationPreset::l1_adv, AblationPreset::full_dft})
        if (name == preset_name(p)) return p;
    return std::nullopt;
}

ImageTensor stage1_guidance(const ImageTensor& in_img, const MaskSpec& m,
                            Sequential<float>* stage1_net, bool stage1_residual,
                            PackLayout layout) {
    if (!stage1_net) return Tensor<float>(in_img.shape());  // zero guide planes
    const Tensor<float> input = stack_batch({stage1_input_planes(in_img, m, layout)});
    // guidance always comes from the frozen net: batch-norm in eval mode
    Tensor<float> pred = stage1_forward(*stage1_net, input, /*train=*/false, stage1_residual);
    Tensor<float> planes({pred.dim(1), pred.dim(2), pred.dim(3)});
    std::copy(&pred.at(0, 0, 0, 0), &pred.at(0, 0, 0, 0) + planes.numel(), planes.data());
    return reconstruct_stage1(planes, layout);
}

std::string stage2_meta_json(const Stage2Config& cfg, AblationPreset preset,
                             const std::string& which) {
    json j;
    j["stage"] = "stage2";
    j["which"] = which;
    j["preset"] = preset_name(preset);
    j["layout"] = cfg.layout == PackLayout::real_imag ? "real_imag" : "mag_phase";
    if (which == "G") {
        j["chain"] = json::parse(layer_spec_to_json(generator_chain(cfg.gen)));
        j["arch"] = {{"in_ch", cfg.gen.in_ch},
                     {"out_ch", cfg.gen.out_ch},
                     {"base", cfg.gen.base},
                     {"res_blocks", cfg.gen.res_blocks}};
    } else {
        j["chain"] = json::parse(layer_spec_to_json(discriminator_chain(cfg.disc)));
        j["arch"] = {{"in_ch", cfg.disc.in_ch}, {"base", cfg.disc.base}};
    }
    return j.dump();
}

namespace {

Tensor<float> slice_sample(const Tensor<float>& batch, int n) {
    Tensor<float> out({batch.dim(1), batch.dim(2), batch.dim(3)});
    std::copy(&batch.at(n, 0, 0, 0), &batch.at(n, 0, 0, 0) + out.numel(), out.data());
    return out;
}

}  // namespace

Stage2Result train_refinement(const std::vector<ImageTensor>& images,
                              Sequential<float>* stage1_net, bool stage1_residual,
                              const Stage2Config& cfg, const LossConfig& losses,
                              AblationPreset preset, const std::string& out_dir) {
    if (images.empty()) throw ConfigError("train_refinement: dataset is empty");
    if (preset == AblationPreset::full_dft && !stage1_net)
        throw ConfigError("train_refinement: full_dft preset needs a stage-1 checkpoint");
    if (preset != AblationPreset::full_dft && stage1_net)
        throw ConfigError("train_refinement: guide planes are zero for this preset");
    const int H = images[0].dim(1), W = images[0].dim(2);

    const bool adversarial = preset != AblationPreset::l1_only && losses.lambda_adv > 0.0;

    Stage2Result res{build_generator<float>(cfg.gen), Sequential<float>(), {}, adversarial};
    he_init(res.generator, split_seed(cfg.seed, "stage2.G.init"));
    if (adversarial) {
        res.discriminator = build_discriminator<float>(cfg.disc);
        he_init(res.discriminator, split_seed(cfg.seed, "stage2.D.init"));
    }
    Adam<float> opt_g(static_cast<float>(cfg.beta1), static_cast<float>(cfg.beta2));
    Adam<float> opt_d(static_cast<float>(cfg.beta1), static_cast<float>(cfg.beta2));
    auto params_g = res.generator.params();
    auto params_d = adversarial ? res.discriminator.params() : std::vector<ParamRef<float>>{};

    std::ofstream log_csv;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        log_csv.open(fs::path(out_dir) / "stage2_log.csv");
        log_csv << (adversarial ? "step,l1,g_adv,d_loss\n" : "step,l1\n");
    }

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto batches = batch_indices(static_cast<int>(images.size()), cfg.batch_size,
                                           split_seed(cfg.seed, "stage2.order"), epoch);
        bool epoch_checked = false;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const int N = static_cast<int>(batches[bi].size());
            std::vector<MaskSpec> masks;
            std::vector<Tensor<float>> gin, gts;
            for (int k = 0; k < N; ++k) {
                const int idx = batches[bi][k];
                masks.push_back(sample_mask(
                    cfg.mask, H, W,
                    split_seed(cfg.seed, "stage2.mask",
                               (static_cast<std::uint64_t>(epoch) << 40) ^
                                   (static_cast<std::uint64_t>(bi) << 20) ^
                                   static_cast<std::uint64_t>(k))));
                const ImageTensor in_img = apply_mask(images[idx], masks.back());
                const ImageTensor guide =
                    stage1_guidance(in_img, masks.back(), stage1_net, stage1_residual, cfg.layout);
                gin.push_back(generator_input(in_img, masks.back(), guide));
                gts.push_back(images[idx]);
            }
            const Tensor<float> gen_in = stack_batch(gin);
            const Tensor<float> gt = stack_batch(gts);

            // generator forward and composite (Algorithm 1 lines 5-6)
            const Tensor<float> i2 = res.generator.forward(gen_in, true);
            Tensor<float> i_pred(i2.shape());
            for (int n = 0; n < N; ++n) {
                const Tensor<float> in_img = slice_sample(gen_in, n);  // first 3 planes = I_in
                Tensor<float> in3({3, H, W});
                std::copy(in_img.data(), in_img.data() + in3.numel(), in3.data());
                const Tensor<float> comp = composite(in3, slice_sample(i2, n), masks[n]);
                std::copy(comp.data(), comp.data() + comp.numel(), &i_pred.at(n, 0, 0, 0));
            }
            if (!epoch_checked) {
                // compositing contract: known pixels must pass through bit-exactly
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x)
                        if (masks[0].at(y, x) &&
                            i_pred.at(0, 0, y, x) != gen_in.at(0, 0, y, x))
                            throw NumericError("train_refinement: composite broke a known pixel");
                epoch_checked = true;
            }

            const double l1 = l1_loss(gt, i_pred);
            if (!std::isfinite(l1))
                throw NumericError("train_refinement: non-finite l1 at step " +
                                   std::to_string(step));

            // dL/dI_pred
            Tensor<float> d_ipred = l1_loss_grad(gt, i_pred);
            for (std::size_t i = 0; i < d_ipred.numel(); ++i)
                d_ipred[i] *= static_cast<float>(losses.lambda_l1);

            double g_adv = std::numeric_limits<double>::quiet_NaN();
            double d_loss = std::numeric_limits<double>::quiet_NaN();
            if (adversarial) {
                const Tensor<float> fake_scores = res.discriminator.forward(i_pred, true);
                g_adv = g_adv_value(fake_scores, losses);
                Tensor<float> dfake = g_adv_grad(fake_scores, losses);
                for (std::size_t i = 0; i < dfake.numel(); ++i)
                    dfake[i] *= static_cast<float>(losses.lambda_adv);
                const Tensor<float> d_ipred_adv = res.discriminator.backward(dfake);
                for (std::size_t i = 0; i < d_ipred.numel(); ++i) d_ipred[i] += d_ipred_adv[i];
            }

            // composite backward: generator output only fills holes
            Tensor<float> d_i2 = d_ipred;
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < 3; ++c)
                    for (int y = 0; y < H; ++y)
                        for (int x = 0; x < W; ++x)
                            if (masks[n].at(y, x)) d_i2.at(n, c, y, x) = 0.0f;

            res.generator.zero_grad();
            res.generator.backward(d_i2);
            opt_g.step(params_g, static_cast<float>(cfg.lr_g));

            if (adversarial) {
                // discriminator phase (Algorithm 1 line 8): real = I_gt,
                // fake = composited I_pred, generator output detached.
                // Each half of the loss runs forward+backward back to back so
                // the cached activations match; parameter grads accumulate.
                res.discriminator.zero_grad();  // drop gradients from the G phase
                const Tensor<float> real_scores = res.discriminator.forward(gt, true);
                res.discriminator.backward(d_real_grad(real_scores, losses));
                const Tensor<float> fake_scores_d = res.discriminator.forward(i_pred, true);
                res.discriminator.backward(d_fake_grad(fake_scores_d, losses));
                d_loss = adversarial_losses(real_scores, fake_scores_d, losses).d_loss;
                if (!std::isfinite(d_loss))
                    throw NumericError("train_refinement: non-finite d_loss at step " +
                                       std::to_string(step));
                opt_d.step(params_d, static_cast<float>(cfg.lr_d));
            }

            res.log.push_back({step, l1, g_adv, d_loss});
            if (log_csv) {
                log_csv.precision(12);
                if (adversarial)
                    log_csv << step << "," << l1 << "," << g_adv << "," << d_loss << "\n";
                else
                    log_csv << step << "," << l1 << "\n";
            }
            ++step;
        }
        if (log_csv) log_csv.flush();
        if (!out_dir.empty() && (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs - 1)) {
            snapshot_network(res.generator, stage2_meta_json(cfg, preset, "G"))
                .save((fs::path(out_dir) / ("stage2_G_epoch" + std::to_string(epoch) + ".ckpt"))
                          .string());
            if (adversarial)
                snapshot_network(res.discriminator, stage2_meta_json(cfg, preset, "D"))
                    .save((fs::path(out_dir) / ("stage2_D_epoch" + std::to_string(epoch) + ".ckpt"))
                              .string());
        }
    }
    return res;
}

ImageTensor inpaint(const ImageTensor& in_img, const MaskSpec& m, Sequential<float>* stage1_net,
                    bool stage1_residual, Sequential<float>& generator, PackLayout layout) {
    const ImageTensor masked = apply_mask(in_img, m);
    const ImageTensor guide = stage1_guidance(masked, m, stage1_net, stage1_residual, layout);
    const Tensor<float> gin = stack_batch({generator_input(masked, m, guide)});
    const Tensor<float> i2 = generator.forward(gin, /*train=*/false);
    Tensor<float> i2s({i2.dim(1), i2.dim(2), i2.dim(3)});
    std::copy(&i2.at(0, 0, 0, 0), &i2.at(0, 0, 0, 0) + i2s.numel(), i2s.data());
    return composite(masked, i2s, m);
}

Sequential<float> load_generator(const std::string& ckpt_path, Stage2Config* cfg_out,
                                 AblationPreset* preset_out) {
    const Checkpoint ckpt = Checkpoint::load(ckpt_path);
    json meta = json::parse(ckpt.meta_json);
    if (meta.at("which").get<std::string>() != "G")
        throw std::runtime_error("load_generator: not a generator checkpoint");
    Stage2Config cfg;
    cfg.gen.in_ch = meta.at("arch").at("in_ch").get<int>();
    cfg.gen.out_ch = meta.at("arch").at("out_ch").get<int>();
    cfg.gen.base = meta.at("arch").at("base").get<int>();
    cfg.gen.res_blocks = meta.at("arch").at("res_blocks").get<int>();
    cfg.layout = meta.at("layout").get<std::string>() == "mag_phase" ? PackLayout::mag_phase
                                                                     : PackLayout::real_imag;
    Sequential<float> g = build_generator<float>(cfg.gen);
    restore_network(g, ckpt);
    if (cfg_out) *cfg_out = cfg;
    if (preset_out) {
        auto p = preset_from_name(meta.at("preset").get<std::string>());
        *preset_out = p.value_or(AblationPreset::full_dft);
    }
    return g;
}

}  // namespace fdi
