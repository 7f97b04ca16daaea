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

#include <CLI11.hpp>
#include <iostream>

#include "fdi/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const fdi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fdi::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage frequency-domain image inpainting"};
    app.require_subcommand(1);

    std::string config_path;
    std::string gen_ckpt, s1_ckpt, split = "test";
    std::vector<std::string> buckets{"regular"};
    int grid_rows = 8;
    bool hole_only = false;
    std::string image_path, mask_path, out_path, gt_path;

    auto* train1 = app.add_subcommand("train-stage1", "Train the frequency-domain deconvolution net");
    train1->add_option("-c,--config", config_path, "experiment config (JSON)")->required();

    auto* train2 = app.add_subcommand("train-stage2", "Train the refinement GAN (Algorithm-1 loop)");
    train2->add_option("-c,--config", config_path, "experiment config (JSON)")->required();

    auto* eval = app.add_subcommand("evaluate", "Metrics and figure grids over a split");
    eval->add_option("-c,--config", config_path)->required();
    eval->add_option("-g,--generator", gen_ckpt, "generator checkpoint")->required();
    eval->add_option("--stage1", s1_ckpt, "stage-1 checkpoint (full_dft models)");
    eval->add_option("--split", split, "train | val | test");
    eval->add_option("--bucket", buckets, "mask buckets: regular, 10-20, ..., 50-60");
    eval->add_option("--grid-rows", grid_rows, "rows per figure grid");
    eval->add_flag("--hole-only", hole_only, "restrict metrics to hole pixels");

    auto* paint = app.add_subcommand("inpaint", "Complete one image with a given mask");
    paint->add_option("-c,--config", config_path)->required();
    paint->add_option("-i,--image", image_path)->required();
    paint->add_option("-m,--mask", mask_path, "grayscale mask PNG, white = hole")->required();
    paint->add_option("-g,--generator", gen_ckpt)->required();
    paint->add_option("--stage1", s1_ckpt);
    paint->add_option("-o,--output", out_path)->required();
    paint->add_option("--gt", gt_path, "ground truth; prints PSNR when given");

    auto* verify = app.add_subcommand("verify", "Spectral identity and shape conformance checks");

    CLI11_PARSE(app, argc, argv);

    if (train1->parsed())
        return guarded([&] {
            const auto ckpt = fdi::run_train_stage1(fdi::load_config(config_path));
            std::cout << "stage-1 checkpoint: " << ckpt << "\n";
            return kExitOk;
        });
    if (train2->parsed())
        return guarded([&] {
            const auto ckpt = fdi::run_train_stage2(fdi::load_config(config_path));
            std::cout << "stage-2 checkpoint: " << ckpt << "\n";
            return kExitOk;
        });
    if (eval->parsed())
        return guarded([&] {
            fdi::EvaluateOptions opts;
            opts.generator_ckpt = gen_ckpt;
            opts.stage1_ckpt = s1_ckpt;
            opts.split = split;
            opts.buckets = buckets;
            opts.grid_rows = grid_rows;
            opts.hole_only = hole_only;
            const auto res = fdi::run_evaluate(fdi::load_config(config_path), opts);
            std::cout << fdi::format_metric_table(res.aggregates);
            std::cout << "metrics: " << res.csv_path << "\n";
            return kExitOk;
        });
    if (paint->parsed())
        return guarded([&] {
            fdi::InpaintOptions opts;
            opts.image_path = image_path;
            opts.mask_path = mask_path;
            opts.generator_ckpt = gen_ckpt;
            opts.stage1_ckpt = s1_ckpt;
            opts.output_path = out_path;
            opts.gt_path = gt_path;
            const auto psnr = fdi::run_inpaint(fdi::load_config(config_path), opts);
            if (psnr) std::cout << "psnr: " << *psnr << " dB\n";
            std::cout << "wrote " << out_path << "\n";
            return kExitOk;
        });
    if (verify->parsed())
        return guarded([&] { return fdi::run_verify(std::cout) ? kExitOk : kExitNumeric; });
    return kExitConfig;
}
