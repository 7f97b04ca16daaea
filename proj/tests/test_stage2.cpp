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

#include <doctest.h>

#include <filesystem>

#include "fdi/errors.hpp"
#include "fdi/metrics.hpp"
#include "fdi/optim.hpp"
#include "fdi/stage2.hpp"
#include "fdi/synth.hpp"
#include "helpers/oracles.hpp"

using namespace fdi;
namespace fs = std::filesystem;

namespace {

std::vector<ImageTensor> texture_set(int n, int size, std::uint64_t seed) {
    std::vector<ImageTensor> out;
    for (int i = 0; i < n; ++i) out.push_back(gen_texture(size, seed + i));
    return out;
}

Stage2Config tiny_stage2(int batch = 4) {
    Stage2Config cfg;
    cfg.gen = {.in_ch = 9, .out_ch = 3, .base = 8, .res_blocks = 1};
    cfg.disc = {.in_ch = 3, .base = 8};
    cfg.mask.kind = MaskKind::regular;
    cfg.mask.ratio = 0.25;
    cfg.batch_size = batch;
    cfg.epochs = 1;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("stage2");

TEST_CASE("generator keeps the printed shapes and the tanh bound") {
    Sequential<float> g = build_generator<float>(GeneratorArch{});
    he_init(g, 1);
    auto x = oracle::random_tensor<float>({1, 9, 64, 64}, 2);
    std::vector<std::vector<int>> shapes;
    const auto y = g.forward_trace(x, false, shapes);
    CHECK(y.shape() == std::vector<int>{1, 3, 64, 64});
    CHECK(max_abs(y) < 1.0f);
    bool bottleneck = false;
    for (const auto& s : shapes) bottleneck |= s == std::vector<int>{1, 256, 16, 16};
    CHECK(bottleneck);
}

TEST_CASE("discriminator emits a 6x6 probability map") {
    Sequential<float> d = build_discriminator<float>(DiscriminatorArch{});
    he_init(d, 3);
    auto x = oracle::random_tensor<float>({1, 3, 64, 64}, 4);
    const auto y = d.forward(x, false);
    REQUIRE(y.shape() == std::vector<int>{1, 1, 6, 6});
    for (std::size_t i = 0; i < y.numel(); ++i) {
        CHECK(y[i] > 0.0f);
        CHECK(y[i] < 1.0f);
    }

    // wrap-translate by 8 pixels: same shape, different scores
    Tensor<float> shifted(x.shape());
    for (int c = 0; c < 3; ++c)
        for (int yy = 0; yy < 64; ++yy)
            for (int xx = 0; xx < 64; ++xx)
                shifted.at(0, c, yy, xx) = x.at(0, c, (yy + 8) % 64, (xx + 8) % 64);
    const auto y2 = d.forward(shifted, false);
    CHECK(y2.shape() == y.shape());
    CHECK(max_abs_diff(y, y2) > 0.0f);
}

TEST_CASE("l1 loss closed forms and oracle") {
    auto gt = oracle::random_tensor<float>({3, 16, 16}, 5);
    CHECK(l1_loss(gt, gt) == 0.0f);
    Tensor<float> up = gt;
    for (std::size_t i = 0; i < up.numel(); ++i) up[i] += 0.5f;
    CHECK(l1_loss(gt, up) == doctest::Approx(0.5).epsilon(1e-6));

    auto pred = oracle::random_tensor<float>({3, 16, 16}, 6);
    double want = 0;
    for (std::size_t i = 0; i < gt.numel(); ++i)
        want += std::abs(static_cast<double>(gt[i]) - pred[i]);
    want /= static_cast<double>(gt.numel());
    CHECK(l1_loss(gt, pred) == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("adversarial losses hit their closed forms") {
    LossConfig cfg;
    const auto ones = Tensor<float>::full({1, 1, 6, 6}, 1.0f);
    const auto zeros = Tensor<float>::full({1, 1, 6, 6}, 0.0f);
    const auto half = Tensor<float>::full({1, 1, 6, 6}, 0.5f);

    const auto perfect = adversarial_losses(ones, zeros, cfg);
    CHECK(perfect.d_loss == doctest::Approx(0.0).epsilon(1e-6));

    CHECK(g_adv_value(half, cfg) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    const auto coin = adversarial_losses(half, half, cfg);
    CHECK(coin.d_loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-9));

    LossConfig literal = cfg;
    literal.non_saturating = false;
    CHECK(g_adv_value(half, literal) == doctest::Approx(-std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("one plain-gradient G update with lambda2=0 strictly decreases l1") {
    const int size = 16;
    const auto images = texture_set(4, size, 700);
    for (std::uint64_t init = 0; init < 10; ++init) {
        Sequential<float> g = build_generator<float>(GeneratorArch{.base = 8, .res_blocks = 1});
        he_init(g, 1000 + init);
        const MaskSpec m = gen_regular_mask(size, size, 0.25, 7 + init);
        std::vector<Tensor<float>> gin, gts;
        for (const auto& img : images) {
            const auto masked = apply_mask(img, m);
            gin.push_back(generator_input(masked, m, Tensor<float>(masked.shape())));
            gts.push_back(img);
        }
        const auto x = stack_batch(gin);
        const auto gt = stack_batch(gts);

        auto composite_batch = [&](const Tensor<float>& i2) {
            Tensor<float> out = i2;
            for (int n = 0; n < out.dim(0); ++n)
                for (int c = 0; c < 3; ++c)
                    for (int y = 0; y < size; ++y)
                        for (int xx = 0; xx < size; ++xx)
                            if (m.at(y, xx)) out.at(n, c, y, xx) = x.at(n, c, y, xx);
            return out;
        };

        const auto i2 = g.forward(x, true);
        const float before = l1_loss(gt, composite_batch(i2));

        Tensor<float> grad = l1_loss_grad(gt, composite_batch(i2));
        for (int n = 0; n < grad.dim(0); ++n)
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < size; ++y)
                    for (int xx = 0; xx < size; ++xx)
                        if (m.at(y, xx)) grad.at(n, c, y, xx) = 0.0f;
        g.zero_grad();
        g.backward(grad);
        for (auto& p : g.params())
            if (p.grad)
                for (std::size_t i = 0; i < p.value->numel(); ++i)
                    (*p.value)[i] -= 1e-3f * (*p.grad)[i];

        const auto i2_after = g.forward(x, true);
        const float after = l1_loss(gt, composite_batch(i2_after));
        CHECK(after < before);
    }
}

TEST_CASE("l1_only runs match lambda2=0 runs parameter for parameter") {
    const auto images = texture_set(4, 16, 800);
    Stage2Config cfg = tiny_stage2();

    LossConfig pure;
    pure.lambda_adv = 0.0;
    const auto a = train_refinement(images, nullptr, false, cfg, pure, AblationPreset::l1_adv, "");
    CHECK_FALSE(a.has_discriminator);  // lambda2 = 0: D never instantiated

    LossConfig defaults;
    const auto b =
        train_refinement(images, nullptr, false, cfg, defaults, AblationPreset::l1_only, "");
    CHECK_FALSE(b.has_discriminator);

    auto pa = const_cast<Stage2Result&>(a).generator.params();
    auto pb = const_cast<Stage2Result&>(b).generator.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i)
        CHECK(max_abs_diff(*pa[i].value, *pb[i].value) == 0.0f);

    // log columns: l1 only
    for (const auto& row : b.log) {
        CHECK(std::isnan(row.g_adv));
        CHECK(std::isnan(row.d_loss));
    }
}

TEST_CASE("adversarial arm trains and keeps spectral norm in contract") {
    const auto images = texture_set(6, 32, 900);
    Stage2Config cfg = tiny_stage2(3);
    cfg.gen.base = 8;
    cfg.disc.base = 16;
    cfg.epochs = 5;
    LossConfig losses;
    auto res = train_refinement(images, nullptr, false, cfg, losses, AblationPreset::l1_adv, "");
    CHECK(res.has_discriminator);
    for (const auto& row : res.log) {
        CHECK(std::isfinite(row.l1));
        CHECK(std::isfinite(row.g_adv));
        CHECK(std::isfinite(row.d_loss));
    }
    // every spectral-norm conv of D ends within the contract window
    for (std::size_t i = 0; i < res.discriminator.size(); ++i)
        if (auto* conv = dynamic_cast<Conv2d<float>*>(&res.discriminator.layer(i))) {
            const double top = oracle::top_singular_value(conv->normalized_weight_matrix());
            CHECK(top >= 0.98);
            CHECK(top <= 1.02);
        }
}

TEST_CASE("joint loss gradient through D matches finite differences") {
    // shrunken G (2 residual blocks, 16 base channels) on 16x16 inputs
    const int size = 16;
    Sequential<double> g =
        build_generator<double>(GeneratorArch{.in_ch = 9, .out_ch = 3, .base = 16, .res_blocks = 2});
    Sequential<double> d = build_discriminator<double>(DiscriminatorArch{.in_ch = 3, .base = 8});
    he_init(g, 60);
    he_init(d, 61);

    const ImageTensor imgf = gen_texture(size, 62);
    const Tensor<double> gt = imgf.cast<double>();
    const MaskSpec m = gen_regular_mask(size, size, 0.25, 63);
    const auto maskedf = apply_mask(imgf, m);
    const Tensor<double> masked = maskedf.cast<double>();

    Tensor<double> gin({1, 9, size, size});
    {
        const auto m3 = mask_tensor<double>(m, 3);
        std::copy(masked.data(), masked.data() + masked.numel(), &gin.at(0, 0, 0, 0));
        std::copy(m3.data(), m3.data() + m3.numel(), &gin.at(0, 3, 0, 0));
        // guide planes zero
    }

    const double lambda1 = 1.0, lambda2 = 0.1;
    LossConfig lc;

    auto composite1 = [&](const Tensor<double>& i2) {
        Tensor<double> out({1, 3, size, size});
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    out.at(0, c, y, x) =
                        m.at(y, x) ? masked.at(c, y, x) : i2.at(0, c, y, x);
        return out;
    };

    auto loss_value = [&] {
        const auto i2 = g.forward(gin, false);
        const auto pred = composite1(i2);
        Tensor<double> pred3({3, size, size});
        std::copy(pred.data(), pred.data() + pred.numel(), pred3.data());
        double l1 = l1_loss(gt, pred3);
        const auto scores = d.forward(pred, false);
        double adv = 0;
        for (std::size_t i = 0; i < scores.numel(); ++i)
            adv -= std::log(std::max(scores[i], 1e-8));
        adv /= static_cast<double>(scores.numel());
        return lambda1 * l1 + lambda2 * adv;
    };

    // analytic gradient
    g.zero_grad();
    d.zero_grad();
    const auto i2 = g.forward(gin, false);
    const auto pred = composite1(i2);
    Tensor<double> pred3({3, size, size});
    std::copy(pred.data(), pred.data() + pred.numel(), pred3.data());
    Tensor<double> dpred({1, 3, size, size});
    {
        const auto g1 = l1_loss_grad(gt, pred3);
        std::copy(g1.data(), g1.data() + g1.numel(), dpred.data());
        for (std::size_t i = 0; i < dpred.numel(); ++i) dpred[i] *= lambda1;
        const auto scores = d.forward(pred, false);
        Tensor<double> dscores(scores.shape());
        for (std::size_t i = 0; i < scores.numel(); ++i)
            dscores[i] = -lambda2 / (std::max(scores[i], 1e-8) *
                                     static_cast<double>(scores.numel()));
        const auto dadv = d.backward(dscores);
        for (std::size_t i = 0; i < dpred.numel(); ++i) dpred[i] += dadv[i];
    }
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                if (m.at(y, x)) dpred.at(0, c, y, x) = 0.0;
    g.backward(dpred);

    auto params = g.params();
    std::mt19937_64 rng(64);
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
        const std::size_t pi = rng() % params.size();
        const std::size_t ei = rng() % params[pi].value->numel();
        oracle::FiniteDiff fd{loss_value,
                              [&](std::size_t i) { return (*params[pi].value)[i]; },
                              [&](std::size_t i, double v) { (*params[pi].value)[i] = v; }};
        const double numeric = fd.grad(ei);
        const double analytic = (*params[pi].grad)[ei];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    CHECK(worst <= 1e-3);
}

TEST_CASE("inpaint honors the composite identity and eval determinism") {
    const int size = 32;
    Sequential<float> g = build_generator<float>(GeneratorArch{.base = 8, .res_blocks = 1});
    he_init(g, 70);
    const ImageTensor img = gen_texture(size, 71);

    SUBCASE("all-known mask returns the input exactly") {
        MaskSpec all;
        all.kind = MaskKind::regular;
        all.height = all.width = size;
        all.grid.assign(static_cast<std::size_t>(size) * size, 1);
        const auto out = inpaint(img, all, nullptr, false, g);
        CHECK(max_abs_diff(out, img) == 0.0f);
    }
    SUBCASE("outputs stay in range and repeat bit-exactly") {
        const MaskSpec m = gen_regular_mask(size, size, 0.25, 72);
        const auto a = inpaint(img, m, nullptr, false, g);
        const auto b = inpaint(img, m, nullptr, false, g);
        CHECK(max_abs(a) <= 1.0f);
        CHECK(max_abs_diff(a, b) == 0.0f);
    }
}

TEST_CASE("full_dft guidance round-trips through checkpoints") {
    const int size = 32;
    const auto images = texture_set(4, size, 1100);

    Stage1Config s1;
    s1.arch = {.depth = 3, .width = 8, .in_planes = 12, .out_planes = 6};
    s1.mask.kind = MaskKind::regular;
    s1.batch_size = 4;
    s1.epochs = 2;
    s1.lr_hi = 1e-2;
    s1.lr_lo = 1e-3;
    s1.seed = 5;
    const fs::path dir = fs::temp_directory_path() / "fdi_stage2_run";
    fs::remove_all(dir);
    train_stage1(images, s1, (dir / "stage1").string());

    Sequential<float> s1net = load_stage1_net((dir / "stage1" / "stage1_epoch1.ckpt").string());

    Stage2Config cfg = tiny_stage2();
    cfg.epochs = 2;
    LossConfig losses;
    auto res = train_refinement(images, &s1net, false, cfg, losses, AblationPreset::full_dft,
                                (dir / "stage2").string());
    CHECK(fs::exists(dir / "stage2" / "stage2_G_epoch0.ckpt"));
    CHECK(fs::exists(dir / "stage2" / "stage2_D_epoch1.ckpt"));
    CHECK(fs::exists(dir / "stage2" / "stage2_log.csv"));

    AblationPreset preset;
    Sequential<float> g = load_generator((dir / "stage2" / "stage2_G_epoch1.ckpt").string(),
                                         nullptr, &preset);
    CHECK(preset == AblationPreset::full_dft);
    const MaskSpec m = gen_regular_mask(size, size, 0.25, 6);
    const auto out = inpaint(images[0], m, &s1net, false, g);
    CHECK(out.shape() == std::vector<int>{3, size, size});
    // known pixels intact
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (m.at(y, x))
                for (int c = 0; c < 3; ++c) CHECK(out.at(c, y, x) == images[0].at(c, y, x));
}

TEST_CASE("preset / guidance combinations are validated") {
    const auto images = texture_set(2, 16, 1200);
    Stage2Config cfg = tiny_stage2(2);
    LossConfig losses;
    CHECK_THROWS_AS(
        train_refinement(images, nullptr, false, cfg, losses, AblationPreset::full_dft, ""),
        ConfigError);
    Sequential<float> s1net = build_deconv_net<float>(Stage1Arch{.depth = 3, .width = 8});
    he_init(s1net, 1);
    CHECK_THROWS_AS(
        train_refinement(images, &s1net, false, cfg, losses, AblationPreset::l1_adv, ""),
        ConfigError);
}

TEST_SUITE_END();
