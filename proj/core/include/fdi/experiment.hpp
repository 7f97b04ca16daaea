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

#include <optional>
#include <string>
#include <vector>

#include "fdi/errors.hpp"
#include "fdi/metrics.hpp"
#include "fdi/stage2.hpp"

namespace fdi {

/// One experiment = one JSON config file. Every training hyperparameter is a
/// named key; defaults follow the printed recipe (64x64 inputs, SGD stage 1,
/// Adam stage 2, lambda_l1 = 1, lambda_adv = 0.1).
struct ExperimentConfig {
    std::uint64_t seed = 1234;
    std::string output_dir;

    struct Dataset {
        std::string root;
        std::array<double, 3> fractions{0.9, 0.05, 0.05};
        int image_size = 64;
        bool center_crop = false;
    } dataset;

    struct Mask {
        std::string mode = "regular";  // regular | irregular
        double ratio = 0.25;
        std::string mask_dir;          // irregular masks on disk (optional)
        std::string bucket = "10-20";  // training bucket in irregular mode
        bool augment = true;
    } mask;

    struct Stage1 {
        int depth = 17;
        int width = 64;
        double lr_hi = 1e-1;
        double lr_lo = 1e-4;
        double momentum = 0.9;
        double weight_decay = 1e-4;
        int batch_size = 128;
        int epochs = 50;
        int checkpoint_every = 1;
        bool residual_prediction = false;
    } stage1;

    struct Stage2 {
        int base_channels = 64;
        int res_blocks = 8;
        double lr_g = 1e-4;
        double lr_d = 1e-5;
        double beta1 = 0.5;
        double beta2 = 0.999;
        int batch_size = 14;
        int epochs = 100;
        int checkpoint_every = 1;
        std::string stage1_checkpoint;  // needed by the full_dft preset
    } stage2;

    struct Loss {
        double lambda_l1 = 1.0;
        double lambda_adv = 0.1;
        bool non_saturating = true;
        double log_eps = 1e-8;
    } loss;

    std::string preset = "full_dft";          // l1_only | l1_adv | full_dft
    std::string spectral_packing = "real_imag";  // real_imag | mag_phase
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
/// Canonical serialization (includes the preset's derived switches so that
/// ablation arms can be diffed field by field).
std::string config_to_json(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

MaskConfig build_mask_config(const ExperimentConfig& cfg);
Stage1Config build_stage1_config(const ExperimentConfig& cfg);
Stage2Config build_stage2_config(const ExperimentConfig& cfg);
LossConfig build_loss_config(const ExperimentConfig& cfg);
PackLayout packing_of(const ExperimentConfig& cfg);

/// Write config snapshot, seed record, manifest + hash into the run dir.
/// Returns the manifest (creating output_dir as needed).
DatasetManifest prepare_run_dir(const ExperimentConfig& cfg);

/// Subcommand bodies; each returns the process exit code contract via
/// exceptions (ConfigError -> 2, NumericError -> 3), success otherwise.
std::string run_train_stage1(const ExperimentConfig& cfg);   // returns last ckpt path
std::string run_train_stage2(const ExperimentConfig& cfg);   // returns last G ckpt path

struct EvaluateOptions {
    std::string generator_ckpt;
    std::string stage1_ckpt;  // optional; required when the G preset is full_dft
    std::string split = "test";
    std::vector<std::string> buckets{"regular"};
    int grid_rows = 8;
    bool hole_only = false;
};

struct EvaluateResult {
    std::vector<MetricRow> rows;
    std::vector<BucketAggregate> aggregates;
    std::string csv_path;
    std::string table_path;
};

EvaluateResult run_evaluate(const ExperimentConfig& cfg, const EvaluateOptions& opts);

struct InpaintOptions {
    std::string image_path;
    std::string mask_path;
    std::string generator_ckpt;
    std::string stage1_ckpt;
    std::string output_path;
    std::string gt_path;  // optional; prints PSNR when set
};

/// Returns PSNR vs GT when a GT was supplied.
std::optional<double> run_inpaint(const ExperimentConfig& cfg, const InpaintOptions& opts);

/// Spectral-identity and shape-conformance self checks; prints one line per
/// check and returns false if any fails.
bool run_verify(std::ostream& os);

/// 5-column figure grid [input | ours | GT | DFT(ours) | DFT(GT)].
ImageTensor compose_grid(const std::vector<std::vector<ImageTensor>>& rows);

}  // namespace fdi
