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

#include "fdi/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <nlohmann/json.hpp>

#include "fdi/checkpoint.hpp"
#include "fdi/rng.hpp"
#include "fdi/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fdi {

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.output_dir = get_or<std::string>(j, "output_dir", "");
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        cfg.dataset.root = get_or<std::string>(d, "root", "");
        if (d.contains("fractions")) {
            auto f = d["fractions"].get<std::vector<double>>();
            if (f.size() != 3) throw ConfigError("config: dataset.fractions must have 3 entries");
            cfg.dataset.fractions = {f[0], f[1], f[2]};
        }
        cfg.dataset.image_size = get_or<int>(d, "image_size", cfg.dataset.image_size);
        cfg.dataset.center_crop = get_or<bool>(d, "center_crop", cfg.dataset.center_crop);
    }
    if (j.contains("mask")) {
        const auto& m = j["mask"];
        cfg.mask.mode = get_or<std::string>(m, "mode", cfg.mask.mode);
        cfg.mask.ratio = get_or<double>(m, "ratio", cfg.mask.ratio);
        cfg.mask.mask_dir = get_or<std::string>(m, "mask_dir", "");
        cfg.mask.bucket = get_or<std::string>(m, "bucket", cfg.mask.bucket);
        cfg.mask.augment = get_or<bool>(m, "augment", cfg.mask.augment);
    }
    if (j.contains("stage1")) {
        const auto& s = j["stage1"];
        cfg.stage1.depth = get_or<int>(s, "depth", cfg.stage1.depth);
        cfg.stage1.width = get_or<int>(s, "width", cfg.stage1.width);
        cfg.stage1.lr_hi = get_or<double>(s, "lr_hi", cfg.stage1.lr_hi);
        cfg.stage1.lr_lo = get_or<double>(s, "lr_lo", cfg.stage1.lr_lo);
        cfg.stage1.momentum = get_or<double>(s, "momentum", cfg.stage1.momentum);
        cfg.stage1.weight_decay = get_or<double>(s, "weight_decay", cfg.stage1.weight_decay);
        cfg.stage1.batch_size = get_or<int>(s, "batch_size", cfg.stage1.batch_size);
        cfg.stage1.epochs = get_or<int>(s, "epochs", cfg.stage1.epochs);
        cfg.stage1.checkpoint_every = get_or<int>(s, "checkpoint_every", 1);
        cfg.stage1.residual_prediction = get_or<bool>(s, "residual_prediction", false);
    }
    if (j.contains("stage2")) {
        const auto& s = j["stage2"];
        cfg.stage2.base_channels = get_or<int>(s, "base_channels", cfg.stage2.base_channels);
        cfg.stage2.res_blocks = get_or<int>(s, "res_blocks", cfg.stage2.res_blocks);
        cfg.stage2.lr_g = get_or<double>(s, "lr_g", cfg.stage2.lr_g);
        cfg.stage2.lr_d = get_or<double>(s, "lr_d", cfg.stage2.lr_d);
        cfg.stage2.beta1 = get_or<double>(s, "beta1", cfg.stage2.beta1);
        cfg.stage2.beta2 = get_or<double>(s, "beta2", cfg.stage2.beta2);
        cfg.stage2.batch_size = get_or<int>(s, "batch_size", cfg.stage2.batch_size);
        cfg.stage2.epochs = get_or<int>(s, "epochs", cfg.stage2.epochs);
        cfg.stage2.checkpoint_every = get_or<int>(s, "checkpoint_every", 1);
        cfg.stage2.stage1_checkpoint = get_or<std::string>(s, "stage1_checkpoint", "");
    }
    if (j.contains("loss")) {
        const auto& l = j["loss"];
        cfg.loss.lambda_l1 = get_or<double>(l, "lambda_l1", cfg.loss.lambda_l1);
        cfg.loss.lambda_adv = get_or<double>(l, "lambda_adv", cfg.loss.lambda_adv);
        cfg.loss.non_saturating = get_or<bool>(l, "non_saturating", true);
        cfg.loss.log_eps = get_or<double>(l, "log_eps", 1e-8);
    }
    cfg.preset = get_or<std::string>(j, "preset", cfg.preset);
    if (j.contains("spectral"))
        cfg.spectral_packing = get_or<std::string>(j["spectral"], "packing", "real_imag");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot read file " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return config_from_json_text(text);
}

std::string config_to_json(const ExperimentConfig& c) {
    const auto preset = preset_from_name(c.preset);
    json j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["dataset"] = {{"root", c.dataset.root},
                    {"fractions", c.dataset.fractions},
                    {"image_size", c.dataset.image_size},
                    {"center_crop", c.dataset.center_crop}};
    j["mask"] = {{"mode", c.mask.mode},
                 {"ratio", c.mask.ratio},
                 {"mask_dir", c.mask.mask_dir},
                 {"bucket", c.mask.bucket},
                 {"augment", c.mask.augment}};
    j["stage1"] = {{"depth", c.stage1.depth},
                   {"width", c.stage1.width},
                   {"lr_hi", c.stage1.lr_hi},
                   {"lr_lo", c.stage1.lr_lo},
                   {"momentum", c.stage1.momentum},
                   {"weight_decay", c.stage1.weight_decay},
                   {"batch_size", c.stage1.batch_size},
                   {"epochs", c.stage1.epochs},
                   {"checkpoint_every", c.stage1.checkpoint_every},
                   {"residual_prediction", c.stage1.residual_prediction}};
    j["stage2"] = {{"base_channels", c.stage2.base_channels},
                   {"res_blocks", c.stage2.res_blocks},
                   {"lr_g", c.stage2.lr_g},
                   {"lr_d", c.stage2.lr_d},
                   {"beta1", c.stage2.beta1},
                   {"beta2", c.stage2.beta2},
                   {"batch_size", c.stage2.batch_size},
                   {"epochs", c.stage2.epochs},
                   {"checkpoint_every", c.stage2.checkpoint_every},
                   {"stage1_checkpoint", c.stage2.stage1_checkpoint}};
    j["loss"] = {{"lambda_l1", c.loss.lambda_l1},
                 {"lambda_adv", c.loss.lambda_adv},
                 {"non_saturating", c.loss.non_saturating},
                 {"log_eps", c.loss.log_eps}};
    j["preset"] = c.preset;
    j["spectral"] = {{"packing", c.spectral_packing}};
    // derived switches, so ablation arms diff exactly where documented
    if (preset) {
        j["derived"] = {{"adversarial_enabled", *preset != AblationPreset::l1_only},
                        {"dft_guide_enabled", *preset == AblationPreset::full_dft}};
    }
    return j.dump(2);
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.dataset.root.empty()) throw ConfigError("config: missing field dataset.root");
    if (cfg.output_dir.empty()) throw ConfigError("config: missing field output_dir");
    if (!preset_from_name(cfg.preset))
        throw ConfigError("config: unknown preset '" + cfg.preset + "'");
    if (cfg.mask.mode != "regular" && cfg.mask.mode != "irregular")
        throw ConfigError("config: mask.mode must be regular or irregular");
    if (cfg.mask.mode == "regular" && (cfg.mask.ratio <= 0 || cfg.mask.ratio > 1))
        throw ConfigError("config: mask.ratio out of (0,1]");
    if (cfg.mask.mode == "irregular" && !bucket_from_name(cfg.mask.bucket))
        throw ConfigError("config: unknown mask.bucket '" + cfg.mask.bucket + "'");
    if (cfg.stage1.lr_hi <= cfg.stage1.lr_lo || cfg.stage1.lr_lo <= 0)
        throw ConfigError("config: stage1 needs lr_hi > lr_lo > 0");
    if (cfg.stage1.depth < 2) throw ConfigError("config: stage1.depth must be >= 2");
    if (cfg.stage1.epochs <= 0 || cfg.stage2.epochs <= 0)
        throw ConfigError("config: epochs must be positive");
    if (cfg.stage1.batch_size <= 0 || cfg.stage2.batch_size <= 0)
        throw ConfigError("config: batch sizes must be positive");
    if (cfg.loss.lambda_l1 < 0 || cfg.loss.lambda_adv < 0)
        throw ConfigError("config: loss weights must be >= 0");
    if (cfg.spectral_packing != "real_imag" && cfg.spectral_packing != "mag_phase")
        throw ConfigError("config: spectral.packing must be real_imag or mag_phase");
    const double fsum =
        cfg.dataset.fractions[0] + cfg.dataset.fractions[1] + cfg.dataset.fractions[2];
    if (std::abs(fsum - 1.0) > 1e-9) throw ConfigError("config: dataset.fractions must sum to 1");
}

PackLayout packing_of(const ExperimentConfig& cfg) {
    return cfg.spectral_packing == "mag_phase" ? PackLayout::mag_phase : PackLayout::real_imag;
}

MaskConfig build_mask_config(const ExperimentConfig& cfg) {
    MaskConfig mc;
    if (cfg.mask.mode == "regular") {
        mc.kind = MaskKind::regular;
        mc.ratio = cfg.mask.ratio;
        return mc;
    }
    mc.kind = MaskKind::irregular;
    const auto bucket = bucket_from_name(cfg.mask.bucket);
    if (!bucket) throw ConfigError("config: unknown mask.bucket '" + cfg.mask.bucket + "'");
    if (!cfg.mask.mask_dir.empty()) {
        mc.pool = load_irregular_masks(cfg.mask.mask_dir, *bucket, cfg.mask.augment,
                                       cfg.dataset.image_size);
    } else {
        // no mask dataset on disk: synthesize a bucketed pool
        const auto [lo, hi] = bucket_interval(*bucket);
        int produced = 0, attempt = 0;
        while (produced < 64 && attempt < 4096) {
            MaskSpec m = synth_stroke_mask(cfg.dataset.image_size, cfg.dataset.image_size,
                                           0.5 * (lo + hi),
                                           split_seed(cfg.seed, "mask.synth", attempt++));
            const double f = m.hole_fraction();
            if (f > lo && f <= hi) {
                m.bucket = *bucket;
                mc.pool.push_back(std::move(m));
                ++produced;
            }
        }
        if (mc.pool.empty()) throw ConfigError("config: could not synthesize masks for bucket");
    }
    return mc;
}

Stage1Config build_stage1_config(const ExperimentConfig& cfg) {
    Stage1Config s;
    s.arch.depth = cfg.stage1.depth;
    s.arch.width = cfg.stage1.width;
    s.mask = build_mask_config(cfg);
    s.lr_hi = cfg.stage1.lr_hi;
    s.lr_lo = cfg.stage1.lr_lo;
    s.momentum = cfg.stage1.momentum;
    s.weight_decay = cfg.stage1.weight_decay;
    s.batch_size = cfg.stage1.batch_size;
    s.epochs = cfg.stage1.epochs;
    s.checkpoint_every = cfg.stage1.checkpoint_every;
    s.residual_prediction = cfg.stage1.residual_prediction;
    s.layout = packing_of(cfg);
    s.seed = split_seed(cfg.seed, "stage1");
    return s;
}

Stage2Config build_stage2_config(const ExperimentConfig& cfg) {
    Stage2Config s;
    s.gen.base = cfg.stage2.base_channels;
    s.gen.res_blocks = cfg.stage2.res_blocks;
    s.disc.base = cfg.stage2.base_channels;
    s.mask = build_mask_config(cfg);
    s.lr_g = cfg.stage2.lr_g;
    s.lr_d = cfg.stage2.lr_d;
    s.beta1 = cfg.stage2.beta1;
    s.beta2 = cfg.stage2.beta2;
    s.batch_size = cfg.stage2.batch_size;
    s.epochs = cfg.stage2.epochs;
    s.checkpoint_every = cfg.stage2.checkpoint_every;
    s.layout = packing_of(cfg);
    s.seed = split_seed(cfg.seed, "stage2");
    return s;
}

LossConfig build_loss_config(const ExperimentConfig& cfg) {
    LossConfig l;
    l.lambda_l1 = cfg.loss.lambda_l1;
    l.lambda_adv = cfg.loss.lambda_adv;
    l.non_saturating = cfg.loss.non_saturating;
    l.log_eps = cfg.loss.log_eps;
    return l;
}

DatasetManifest prepare_run_dir(const ExperimentConfig& cfg) {
    validate_config(cfg);
    fs::create_directories(cfg.output_dir);
    {
        std::ofstream snap(fs::path(cfg.output_dir) / "config_snapshot.json");
        snap << config_to_json(cfg) << "\n";
    }
    {
        std::ofstream seedrec(fs::path(cfg.output_dir) / "seed.txt");
        seedrec << cfg.seed << "\n";
    }
    const auto manifest_path = fs::path(cfg.output_dir) / "manifest.jsonl";
    DatasetManifest manifest;
    if (fs::exists(manifest_path)) {
        manifest = load_manifest(manifest_path.string());
        manifest.root = cfg.dataset.root;
    } else {
        manifest = make_split(cfg.dataset.root, cfg.dataset.fractions, cfg.seed);
        save_manifest(manifest, manifest_path.string());
    }
    {
        std::ofstream hash(fs::path(cfg.output_dir) / "manifest_hash.txt");
        hash << manifest_hash(manifest) << "\n";
    }
    return manifest;
}

std::string run_train_stage1(const ExperimentConfig& cfg) {
    const DatasetManifest manifest = prepare_run_dir(cfg);
    LoadOptions lo{cfg.dataset.image_size, cfg.dataset.center_crop};
    const ImageCache cache = ImageCache::from_manifest(manifest, "train", lo);
    const Stage1Config s1 = build_stage1_config(cfg);
    const std::string out = (fs::path(cfg.output_dir) / "stage1").string();
    Stage1Result res = train_stage1(cache.images, s1, out);
    const int last = s1.epochs - 1;
    return (fs::path(out) / ("stage1_epoch" + std::to_string(last) + ".ckpt")).string();
}

std::string run_train_stage2(const ExperimentConfig& cfg) {
    const DatasetManifest manifest = prepare_run_dir(cfg);
    LoadOptions lo{cfg.dataset.image_size, cfg.dataset.center_crop};
    const ImageCache cache = ImageCache::from_manifest(manifest, "train", lo);
    const Stage2Config s2 = build_stage2_config(cfg);
    const LossConfig losses = build_loss_config(cfg);
    const AblationPreset preset = *preset_from_name(cfg.preset);

    Sequential<float> stage1_net;
    Sequential<float>* stage1_ptr = nullptr;
    bool stage1_residual = false;
    if (preset == AblationPreset::full_dft) {
        std::string ckpt = cfg.stage2.stage1_checkpoint;
        if (ckpt.empty()) {
            // default to the last stage-1 checkpoint in this run directory
            ckpt = (fs::path(cfg.output_dir) / "stage1" /
                    ("stage1_epoch" + std::to_string(cfg.stage1.epochs - 1) + ".ckpt"))
                       .string();
        }
        if (!fs::exists(ckpt))
            throw ConfigError("config: stage2.stage1_checkpoint not found: " + ckpt);
        Stage1Config loaded;
        stage1_net = load_stage1_net(ckpt, &loaded);
        stage1_residual = loaded.residual_prediction;
        stage1_ptr = &stage1_net;
    }
    const std::string out = (fs::path(cfg.output_dir) / "stage2").string();
    Stage2Result res = train_refinement(cache.images, stage1_ptr, stage1_residual, s2, losses,
                                        preset, out);
    const int last = s2.epochs - 1;
    return (fs::path(out) / ("stage2_G_epoch" + std::to_string(last) + ".ckpt")).string();
}

ImageTensor compose_grid(const std::vector<std::vector<ImageTensor>>& rows) {
    if (rows.empty() || rows[0].empty()) throw std::invalid_argument("compose_grid: empty grid");
    const int cols = static_cast<int>(rows[0].size());
    const int H = rows[0][0].dim(1), W = rows[0][0].dim(2);
    ImageTensor grid({3, static_cast<int>(rows.size()) * H, cols * W});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<int>(rows[r].size()) != cols)
            throw std::invalid_argument("compose_grid: ragged rows");
        for (int c = 0; c < cols; ++c) {
            const ImageTensor& cell = rows[r][c];
            for (int ch = 0; ch < 3; ++ch)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x)
                        grid.at(ch, static_cast<int>(r) * H + y, c * W + x) =
                            cell.dim(0) == 3 ? cell.at(ch, y, x) : cell.at(0, y, x);
        }
    }
    return grid;
}

namespace {

/// [0,1] magnitude map rescaled to the [-1,1] image convention for grids.
ImageTensor map_to_image(const Tensor<float>& map01) {
    ImageTensor out = map01;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] * 2.0f - 1.0f;
    return out;
}

MaskSpec eval_mask(const ExperimentConfig& cfg, const std::string& bucket_name_str, int size,
                   const std::vector<MaskSpec>& pool, std::size_t idx) {
    if (bucket_name_str == "regular")
        return gen_regular_mask(size, size, cfg.mask.ratio,
                                split_seed(cfg.seed, "eval.mask", idx));
    if (pool.empty()) throw ConfigError("evaluate: no irregular masks for bucket " + bucket_name_str);
    return pool[idx % pool.size()];
}

std::vector<MaskSpec> eval_mask_pool(const ExperimentConfig& cfg, const std::string& bucket) {
    if (bucket == "regular") return {};
    ExperimentConfig sub = cfg;
    sub.mask.mode = "irregular";
    sub.mask.bucket = bucket;
    sub.mask.augment = false;
    return build_mask_config(sub).pool;
}

}  // namespace

EvaluateResult run_evaluate(const ExperimentConfig& cfg, const EvaluateOptions& opts) {
    validate_config(cfg);
    if (!fs::exists(opts.generator_ckpt))
        throw ConfigError("evaluate: generator checkpoint not found: " + opts.generator_ckpt);
    Stage2Config gcfg;
    AblationPreset preset;
    Sequential<float> generator = load_generator(opts.generator_ckpt, &gcfg, &preset);

    Sequential<float> stage1_net;
    Sequential<float>* stage1_ptr = nullptr;
    bool stage1_residual = false;
    if (preset == AblationPreset::full_dft) {
        if (opts.stage1_ckpt.empty() || !fs::exists(opts.stage1_ckpt))
            throw ConfigError("evaluate: full_dft generator needs --stage1 checkpoint");
        Stage1Config loaded;
        stage1_net = load_stage1_net(opts.stage1_ckpt, &loaded);
        stage1_residual = loaded.residual_prediction;
        stage1_ptr = &stage1_net;
    }

    const DatasetManifest manifest = prepare_run_dir(cfg);
    LoadOptions lo{cfg.dataset.image_size, cfg.dataset.center_crop};
    const ImageCache cache = ImageCache::from_manifest(manifest, opts.split, lo);

    const fs::path eval_dir = fs::path(cfg.output_dir) / "eval";
    fs::create_directories(eval_dir);

    EvaluateResult result;
    for (const auto& bucket : opts.buckets) {
        const auto pool = eval_mask_pool(cfg, bucket);
        std::vector<std::vector<ImageTensor>> grid_rows;
        for (std::size_t i = 0; i < cache.images.size(); ++i) {
            const ImageTensor& gt = cache.images[i];
            const MaskSpec m = eval_mask(cfg, bucket, cfg.dataset.image_size, pool, i);
            const ImageTensor in_img = apply_mask(gt, m);
            const ImageTensor pred =
                inpaint(gt, m, stage1_ptr, stage1_residual, generator, gcfg.layout);

            const Tensor<float> gt01 = to_unit_range(gt);
            const Tensor<float> pred01 = to_unit_range(pred);
            MetricRow row;
            row.item = fs::path(cache.paths[i]).filename().string();
            row.bucket = bucket;
            if (opts.hole_only) {
                row.psnr = psnr_masked(gt01, pred01, m);
                row.ssim = ssim_masked(gt01, pred01, m);
                row.l1pct = l1_pct_masked(gt01, pred01, m);
            } else {
                row.psnr = psnr(gt01, pred01);
                row.ssim = ssim(gt01, pred01);
                row.l1pct = l1_pct(gt01, pred01);
            }
            result.rows.push_back(row);

            if (static_cast<int>(grid_rows.size()) < opts.grid_rows) {
                grid_rows.push_back({in_img, pred, gt,
                                     map_to_image(spectrum_magnitude_map(forward_dft(pred))),
                                     map_to_image(spectrum_magnitude_map(forward_dft(gt)))});
            }
        }
        if (!grid_rows.empty()) {
            save_image(compose_grid(grid_rows),
                       (eval_dir / ("grid_" + bucket + ".png")).string());
        }
    }
    result.aggregates = aggregate(result.rows);
    result.csv_path = (eval_dir / "metrics.csv").string();
    result.table_path = (eval_dir / "metrics.txt").string();
    write_metrics_csv(result.rows, result.aggregates, result.csv_path);
    {
        std::ofstream table(result.table_path);
        table << format_metric_table(result.aggregates);
    }
    return result;
}

std::optional<double> run_inpaint(const ExperimentConfig& cfg, const InpaintOptions& opts) {
    if (!fs::exists(opts.image_path)) throw ConfigError("inpaint: image not found: " + opts.image_path);
    if (!fs::exists(opts.mask_path)) throw ConfigError("inpaint: mask not found: " + opts.mask_path);
    if (!fs::exists(opts.generator_ckpt))
        throw ConfigError("inpaint: generator checkpoint not found: " + opts.generator_ckpt);

    Stage2Config gcfg;
    AblationPreset preset;
    Sequential<float> generator = load_generator(opts.generator_ckpt, &gcfg, &preset);
    Sequential<float> stage1_net;
    Sequential<float>* stage1_ptr = nullptr;
    bool stage1_residual = false;
    if (preset == AblationPreset::full_dft) {
        if (opts.stage1_ckpt.empty() || !fs::exists(opts.stage1_ckpt))
            throw ConfigError("inpaint: full_dft generator needs --stage1 checkpoint");
        Stage1Config loaded;
        stage1_net = load_stage1_net(opts.stage1_ckpt, &loaded);
        stage1_residual = loaded.residual_prediction;
        stage1_ptr = &stage1_net;
    }

    LoadOptions lo{cfg.dataset.image_size, cfg.dataset.center_crop};
    const ImageTensor img = load_image(opts.image_path, lo);
    const MaskSpec m = load_mask_png(opts.mask_path, cfg.dataset.image_size);

    const ImageTensor out = m.hole_count() == 0
                                ? img  // nothing to fill: pass the resized input through
                                : inpaint(img, m, stage1_ptr, stage1_residual, generator,
                                          gcfg.layout);
    save_image(out, opts.output_path);

    if (!opts.gt_path.empty()) {
        const ImageTensor gt = load_image(opts.gt_path, lo);
        return psnr(to_unit_range(gt), to_unit_range(out));
    }
    return std::nullopt;
}

namespace {

bool check_line(std::ostream& os, const std::string& name, bool ok, const std::string& detail) {
    os << (ok ? "[PASS] " : "[FAIL] ") << name << " " << detail << "\n";
    return ok;
}

}  // namespace

bool run_verify(std::ostream& os) {
    bool all = true;
    auto rng = make_rng(20260809);
    std::uniform_real_distribution<float> ud(-1.0f, 1.0f);

    {  // round trip, float32
        Tensor<float> x({3, 64, 64});
        for (std::size_t i = 0; i < x.numel(); ++i) x[i] = ud(rng);
        const auto inv = inverse_dft(forward_dft(x));
        const float err = max_abs_diff(inv.image, x);
        all &= check_line(os, "dft round trip (3x64x64, float32)", err <= 1e-5f,
                          "max|x' - x| = " + std::to_string(err));
    }
    {  // Parseval across sizes
        double worst = 0;
        for (int size : {4, 8, 16, 64}) {
            Tensor<float> x({3, size, size});
            for (std::size_t i = 0; i < x.numel(); ++i) x[i] = ud(rng);
            const auto spec = forward_dft(x);
            double es = 0, ef = 0;
            for (std::size_t i = 0; i < x.numel(); ++i) es += static_cast<double>(x[i]) * x[i];
            for (const auto& z : spec.data) ef += std::norm(z);
            worst = std::max(worst, std::abs(es - ef) / es);
        }
        all &= check_line(os, "parseval (sizes 4/8/16/64)", worst <= 1e-4,
                          "worst relative error = " + std::to_string(worst));
    }
    {  // masking-as-convolution identity
        double worst = 0;
        for (int size : {4, 8, 16, 64}) {
            Tensor<float> img({1, size, size}), mask({1, size, size});
            for (std::size_t i = 0; i < img.numel(); ++i) img[i] = ud(rng);
            std::bernoulli_distribution bd(0.7);
            for (std::size_t i = 0; i < mask.numel(); ++i) mask[i] = bd(rng) ? 1.0f : 0.0f;
            worst = std::max(worst, verify_masking_identity(img, mask));
        }
        all &= check_line(os, "masking identity (sizes 4/8/16/64)", worst <= 1e-5,
                          "worst residual = " + std::to_string(worst));
    }
    {  // printed shape conformance, stage 1
        const auto out = shape_of(deconv_chain(Stage1Arch{}), {12, 64, 64});
        all &= check_line(os, "deconv net 12x64x64 -> 6x64x64",
                          out == std::array<int, 3>{6, 64, 64}, "");
    }
    {  // printed shape conformance, stage 2 (live forward)
        GeneratorArch ga;
        DiscriminatorArch da;
        const auto gout = shape_of(generator_chain(ga), {9, 64, 64});
        const auto dout = shape_of(discriminator_chain(da), {3, 64, 64});
        bool ok = gout == std::array<int, 3>{3, 64, 64} && dout == std::array<int, 3>{1, 6, 6};
        // bottleneck: 256 x 16 x 16 after the encoder
        const auto trace = shape_trace(generator_chain(ga), {9, 64, 64});
        bool bottleneck = false;
        for (const auto& s : trace) bottleneck |= (s == std::array<int, 3>{256, 16, 16});
        ok &= bottleneck;
        all &= check_line(os, "generator 9x64x64 -> 3x64x64 via 256x16x16, patch scores 1x6x6",
                          ok, "");
    }
    return all;
}

}  // namespace fdi
