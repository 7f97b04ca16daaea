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

#include "fdi/stage1.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "fdi/checkpoint.hpp"
#include "fdi/errors.hpp"
#include "fdi/optim.hpp"
#include "fdi/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fdi {

std::vector<LayerSpec> deconv_chain(const Stage1Arch& arch) {
    if (arch.depth < 2) throw std::invalid_argument("deconv_chain: depth must be >= 2");
    std::vector<LayerSpec> chain;
    chain.push_back(conv_spec(arch.in_planes, arch.width, 3, 1, 1));
    chain.push_back(relu_spec());
    for (int i = 0; i < arch.depth - 2; ++i) {
        chain.push_back(conv_spec(arch.width, arch.width, 3, 1, 1));
        chain.push_back(batch_norm_spec(arch.width));
        chain.push_back(relu_spec());
    }
    chain.push_back(conv_spec(arch.width, arch.out_planes, 3, 1, 1));
    return chain;
}

MaskSpec sample_mask(const MaskConfig& cfg, int h, int w, std::uint64_t seed) {
    if (cfg.kind == MaskKind::regular) return gen_regular_mask(h, w, cfg.ratio, seed);
    if (cfg.pool.empty()) throw ConfigError("sample_mask: irregular mask pool is empty");
    auto rng = make_rng(seed);
    std::uniform_int_distribution<std::size_t> d(0, cfg.pool.size() - 1);
    return cfg.pool[d(rng)];
}

Tensor<float> packed_image_planes(const ImageTensor& img, PackLayout layout) {
    PackedSpectrum<float> packed = pack_spectrum(forward_dft(img), layout);
    scale_planes(packed, network_spectrum_scale<float>(img.dim(1), img.dim(2)));
    return packed.planes;
}

Tensor<float> stage1_input_planes(const ImageTensor& masked, const MaskSpec& m,
                                  PackLayout layout) {
    const int H = masked.dim(1), W = masked.dim(2);
    const Tensor<float> img_planes = packed_image_planes(masked, layout);

    // the mask spectrum is channel-independent: transform once, replicate to 3
    Tensor<float> mask1({1, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) mask1.at(0, y, x) = static_cast<float>(m.at(y, x));
    PackedSpectrum<float> mp = pack_spectrum(forward_dft(mask1), layout);
    scale_planes(mp, network_spectrum_scale<float>(H, W));

    const int cpl = 2 * masked.dim(0);  // image planes
    Tensor<float> out({cpl + 6, H, W});
    std::copy(img_planes.data(), img_planes.data() + img_planes.numel(), out.data());
    for (int rep = 0; rep < 3; ++rep)
        for (int pl = 0; pl < 2; ++pl)
            std::copy(&mp.planes.at(pl, 0, 0), &mp.planes.at(pl, 0, 0) + H * W,
                      &out.at(cpl + 2 * rep + pl, 0, 0));
    return out;
}

Tensor<float> stage1_target_planes(const ImageTensor& gt, PackLayout layout) {
    return packed_image_planes(gt, layout);
}

Tensor<float> stack_batch(const std::vector<Tensor<float>>& samples) {
    if (samples.empty()) throw std::invalid_argument("stack_batch: empty batch");
    const auto& s0 = samples.front().shape();
    Tensor<float> out({static_cast<int>(samples.size()), s0[0], s0[1], s0[2]});
    for (std::size_t n = 0; n < samples.size(); ++n) {
        if (samples[n].shape() != s0) throw std::invalid_argument("stack_batch: ragged batch");
        std::copy(samples[n].data(), samples[n].data() + samples[n].numel(),
                  &out.at(static_cast<int>(n), 0, 0, 0));
    }
    return out;
}

Tensor<float> stage1_forward(Sequential<float>& net, const Tensor<float>& input, bool train,
                             bool residual_prediction) {
    Tensor<float> out = net.forward(input, train);
    if (residual_prediction) {
        // add back the masked-image spectrum planes (first out-planes of input)
        for (int n = 0; n < out.dim(0); ++n)
            for (int c = 0; c < out.dim(1); ++c)
                for (int y = 0; y < out.dim(2); ++y)
                    for (int x = 0; x < out.dim(3); ++x)
                        out.at(n, c, y, x) += input.at(n, c, y, x);
    }
    return out;
}

ImageTensor reconstruct_stage1(const Tensor<float>& packed_planes, PackLayout layout) {
    if (packed_planes.rank() != 3)
        throw std::invalid_argument("reconstruct_stage1: expected planes tensor C x H x W");
    const int H = packed_planes.dim(1), W = packed_planes.dim(2);
    PackedSpectrum<float> packed{packed_planes, layout};
    scale_planes(packed, 1.0f / network_spectrum_scale<float>(H, W));
    const auto inv = inverse_dft(unpack_spectrum(packed));
    return clamp(inv.image, -1.0f, 1.0f);
}

std::string stage1_meta_json(const Stage1Config& cfg, int h, int w) {
    json j;
    j["stage"] = "stage1";
    j["chain"] = json::parse(layer_spec_to_json(deconv_chain(cfg.arch)));
    j["arch"] = {{"depth", cfg.arch.depth},
                 {"width", cfg.arch.width},
                 {"in_planes", cfg.arch.in_planes},
                 {"out_planes", cfg.arch.out_planes}};
    j["spectrum_scale"] = network_spectrum_scale<double>(h, w);
    j["layout"] = cfg.layout == PackLayout::real_imag ? "real_imag" : "mag_phase";
    j["residual_prediction"] = cfg.residual_prediction;
    return j.dump();
}

Stage1Result train_stage1(const std::vector<ImageTensor>& images, const Stage1Config& cfg,
                          const std::string& out_dir) {
    if (images.empty()) throw ConfigError("train_stage1: dataset is empty");
    if (cfg.lr_hi <= cfg.lr_lo || cfg.lr_lo <= 0)
        throw ConfigError("train_stage1: need lr_hi > lr_lo > 0");
    const int H = images[0].dim(1), W = images[0].dim(2);

    Stage1Result res{build_deconv_net<float>(cfg.arch), {}};
    he_init(res.net, split_seed(cfg.seed, "stage1.init"));
    SGD<float> opt(static_cast<float>(cfg.momentum), static_cast<float>(cfg.weight_decay));
    auto params = res.net.params();

    // clean-image spectra are mask-independent; compute once
    std::vector<Tensor<float>> targets;
    targets.reserve(images.size());
    for (const auto& img : images) targets.push_back(stage1_target_planes(img, cfg.layout));

    std::ofstream log_csv;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        log_csv.open(fs::path(out_dir) / "stage1_log.csv");
        log_csv << "epoch,loss,lr\n";
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = exp_lr_schedule(cfg.lr_hi, cfg.lr_lo, epoch, cfg.epochs);
        const auto batches =
            batch_indices(static_cast<int>(images.size()), cfg.batch_size,
                          split_seed(cfg.seed, "stage1.order"), epoch);
        double epoch_loss = 0;
        std::size_t steps = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            std::vector<Tensor<float>> inputs, tgts;
            for (std::size_t k = 0; k < batches[bi].size(); ++k) {
                const int idx = batches[bi][k];
                const MaskSpec m = sample_mask(
                    cfg.mask, H, W,
                    split_seed(cfg.seed, "stage1.mask",
                               (static_cast<std::uint64_t>(epoch) << 40) ^
                                   (static_cast<std::uint64_t>(bi) << 20) ^ k));
                const ImageTensor masked = apply_mask(images[idx], m);
                inputs.push_back(stage1_input_planes(masked, m, cfg.layout));
                tgts.push_back(targets[idx]);
            }
            const Tensor<float> input = stack_batch(inputs);
            const Tensor<float> target = stack_batch(tgts);

            res.net.zero_grad();
            const Tensor<float> pred = stage1_forward(res.net, input, true, cfg.residual_prediction);
            const float loss = stage1_loss(pred, target);
            if (!std::isfinite(loss))
                throw NumericError("train_stage1: non-finite loss at epoch " +
                                   std::to_string(epoch));
            res.net.backward(stage1_loss_grad(pred, target));
            opt.step(params, static_cast<float>(lr));
            epoch_loss += loss;
            ++steps;
        }
        epoch_loss /= static_cast<double>(steps);
        res.log.push_back({epoch, epoch_loss, lr});
        if (log_csv) {
            log_csv.precision(12);
            log_csv << epoch << "," << epoch_loss << "," << lr << "\n";
            log_csv.flush();
        }
        if (!out_dir.empty() && (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs - 1)) {
            const auto path = fs::path(out_dir) / ("stage1_epoch" + std::to_string(epoch) + ".ckpt");
            snapshot_network(res.net, stage1_meta_json(cfg, H, W)).save(path.string());
        }
    }
    return res;
}

Sequential<float> load_stage1_net(const std::string& ckpt_path, Stage1Config* cfg_out) {
    const Checkpoint ckpt = Checkpoint::load(ckpt_path);
    json meta = json::parse(ckpt.meta_json);
    Stage1Config cfg;
    cfg.arch.depth = meta.at("arch").at("depth").get<int>();
    cfg.arch.width = meta.at("arch").at("width").get<int>();
    cfg.arch.in_planes = meta.at("arch").at("in_planes").get<int>();
    cfg.arch.out_planes = meta.at("arch").at("out_planes").get<int>();
    cfg.layout = meta.at("layout").get<std::string>() == "mag_phase" ? PackLayout::mag_phase
                                                                     : PackLayout::real_imag;
    cfg.residual_prediction = meta.at("residual_prediction").get<bool>();
    Sequential<float> net = build_deconv_net<float>(cfg.arch);
    restore_network(net, ckpt);
    if (cfg_out) *cfg_out = cfg;
    return net;
}

}  // namespace fdi
