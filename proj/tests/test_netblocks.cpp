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

#include "fdi/checkpoint.hpp"
#include "fdi/optim.hpp"
#include "fdi/stage1.hpp"
#include "fdi/stage2.hpp"
#include "helpers/oracles.hpp"

using namespace fdi;

namespace {

// L(x) = sum(forward(x) * probe) so that dL/dy = probe exactly.
double probe_loss(Sequential<double>& net, const Tensor<double>& x, const Tensor<double>& probe,
                  bool train) {
    const Tensor<double> y = net.forward(x, train);
    double acc = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) acc += y[i] * probe[i];
    return acc;
}

// Max relative error between analytic parameter gradients and central
// finite differences over `n_probes` randomly chosen parameter entries.
double param_grad_check(Sequential<double>& net, const Tensor<double>& x,
                        const Tensor<double>& probe, bool train, int n_probes,
                        std::uint64_t seed) {
    auto params = net.params();
    net.zero_grad();
    probe_loss(net, x, probe, train);
    net.backward(probe);

    std::mt19937_64 rng(seed);
    double worst = 0;
    for (int k = 0; k < n_probes; ++k) {
        const std::size_t pi = rng() % params.size();
        if (!params[pi].grad) continue;
        const std::size_t ei = rng() % params[pi].value->numel();
        const double analytic = (*params[pi].grad)[ei];
        oracle::FiniteDiff fd{
            [&] { return probe_loss(net, x, probe, train); },
            [&](std::size_t i) { return (*params[pi].value)[i]; },
            [&](std::size_t i, double v) { (*params[pi].value)[i] = v; }};
        const double numeric = fd.grad(ei);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    return worst;
}

// Same check for the gradient w.r.t. the input tensor.
double input_grad_check(Sequential<double>& net, Tensor<double> x, const Tensor<double>& probe,
                        bool train, int n_probes, std::uint64_t seed) {
    net.zero_grad();
    probe_loss(net, x, probe, train);
    const Tensor<double> gx = net.backward(probe);

    std::mt19937_64 rng(seed);
    double worst = 0;
    for (int k = 0; k < n_probes; ++k) {
        const std::size_t ei = rng() % x.numel();
        oracle::FiniteDiff fd{
            [&] { return probe_loss(net, x, probe, train); },
            [&](std::size_t i) { return x[i]; },
            [&](std::size_t i, double v) { x[i] = v; }};
        const double numeric = fd.grad(ei);
        const double denom = std::max({std::abs(gx[ei]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(gx[ei] - numeric) / denom);
    }
    return worst;
}

}  // namespace

TEST_SUITE_BEGIN("netblocks");

TEST_CASE("conv shape arithmetic reproduces the printed sizes") {
    CHECK(conv_out_size(64, 4, 2, 1) == 32);
    CHECK(conv_out_size(8, 4, 1, 1) == 7);
    CHECK(conv_out_size(7, 4, 1, 1) == 6);
    CHECK(conv_out_size(64, 3, 1, 1) == 64);
    CHECK(conv_out_size(64, 7, 1, 3) == 64);
    CHECK(tconv_out_size(16, 4, 2, 1) == 32);
    CHECK(tconv_out_size(32, 4, 2, 1) == 64);
}

TEST_CASE("inconsistent chains are spec errors") {
    CHECK_THROWS_AS(conv_out_size(63, 4, 2, 1), std::invalid_argument);  // non-integral
    CHECK_THROWS_AS(conv_out_size(2, 7, 1, 0), std::invalid_argument);   // kernel too large
    std::vector<LayerSpec> bad{conv_spec(3, 8, 3, 1, 1), conv_spec(16, 8, 3, 1, 1)};
    CHECK_THROWS_AS(shape_of(bad, {3, 16, 16}), std::invalid_argument);
}

TEST_CASE("stage-1 table: 12x64x64 in, 6x64x64 out, 17 weight layers") {
    const auto chain = deconv_chain(Stage1Arch{});
    CHECK(shape_of(chain, {12, 64, 64}) == std::array<int, 3>{6, 64, 64});
    int convs = 0;
    for (const auto& s : chain) convs += s.kind == LayerKind::conv;
    CHECK(convs == 17);
    // every intermediate stays at 64x64
    for (const auto& s : shape_trace(chain, {12, 64, 64})) {
        CHECK(s[1] == 64);
        CHECK(s[2] == 64);
    }
}

TEST_CASE("stage-2 table: generator and discriminator rows") {
    const auto gchain = generator_chain(GeneratorArch{});
    const auto trace = shape_trace(gchain, {9, 64, 64});
    auto has = [&](std::array<int, 3> s) {
        for (const auto& t : trace)
            if (t == s) return true;
        return false;
    };
    CHECK(has({64, 64, 64}));
    CHECK(has({128, 32, 32}));
    CHECK(has({256, 16, 16}));
    CHECK(trace.back() == std::array<int, 3>{3, 64, 64});

    const auto dchain = discriminator_chain(DiscriminatorArch{});
    const auto dtrace = shape_trace(dchain, {3, 64, 64});
    const std::vector<std::array<int, 3>> want{
        {64, 32, 32}, {128, 16, 16}, {256, 8, 8}, {512, 7, 7}, {1, 6, 6}};
    for (const auto& s : want) {
        bool found = false;
        for (const auto& t : dtrace) found |= t == s;
        CHECK(found);
    }
    CHECK(dtrace.back() == std::array<int, 3>{1, 6, 6});
}

TEST_CASE("closed-form parameter counts match the live networks") {
    Sequential<float> s1(deconv_chain(Stage1Arch{}));
    CHECK(s1.num_params() == param_count(deconv_chain(Stage1Arch{})));
    Sequential<float> g(generator_chain(GeneratorArch{}));
    CHECK(g.num_params() == param_count(generator_chain(GeneratorArch{})));
    Sequential<float> d(discriminator_chain(DiscriminatorArch{}));
    CHECK(d.num_params() == param_count(discriminator_chain(DiscriminatorArch{})));
}

TEST_CASE("layer spec chains serialize round-trip") {
    const auto chain = generator_chain(GeneratorArch{.in_ch = 9, .out_ch = 3, .base = 16,
                                                      .res_blocks = 2});
    const auto back = layer_spec_from_json(layer_spec_to_json(chain));
    REQUIRE(back.size() == chain.size());
    for (std::size_t i = 0; i < chain.size(); ++i) {
        CHECK(back[i].kind == chain[i].kind);
        CHECK(back[i].kernel == chain[i].kernel);
        CHECK(back[i].stride == chain[i].stride);
        CHECK(back[i].padding == chain[i].padding);
        CHECK(back[i].in_ch == chain[i].in_ch);
        CHECK(back[i].out_ch == chain[i].out_ch);
        CHECK(back[i].spectral_norm == chain[i].spectral_norm);
    }
}

TEST_CASE("he init: sample variance 2/fan_in, zero biases, seed determinism") {
    // fan_in = 3*3*64 = 576, and 64->32 gives 18432 samples
    Sequential<float> net({conv_spec(64, 32, 3, 1, 1)});
    he_init(net, 2024);
    auto params = net.params();
    REQUIRE(params.size() == 2);
    double mean = 0, var = 0;
    const auto& w = *params[0].value;
    for (std::size_t i = 0; i < w.numel(); ++i) mean += w[i];
    mean /= static_cast<double>(w.numel());
    for (std::size_t i = 0; i < w.numel(); ++i) var += (w[i] - mean) * (w[i] - mean);
    var /= static_cast<double>(w.numel());
    const double want = 2.0 / 576.0;
    CHECK(var == doctest::Approx(want).epsilon(0.10));
    CHECK(max_abs(*params[1].value) == 0.0f);

    Sequential<float> net2({conv_spec(64, 32, 3, 1, 1)});
    he_init(net2, 2024);
    CHECK(max_abs_diff(*net2.params()[0].value, w) == 0.0f);
    Sequential<float> net3({conv_spec(64, 32, 3, 1, 1)});
    he_init(net3, 2025);
    CHECK(max_abs_diff(*net3.params()[0].value, w) > 0.0f);
}

TEST_CASE("spectral normalization against the SVD oracle") {
    SUBCASE("identity matrix: sigma 1, output unchanged") {
        MatX<double> id = MatX<double>::Identity(8, 8);
        PowerIterState<double> st;
        const MatX<double> out = spectral_normalize(id, 10, st);
        CHECK((out - id).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("diag(3,1,0.5): sigma converges to 3") {
        MatX<double> d = MatX<double>::Zero(3, 3);
        d(0, 0) = 3;
        d(1, 1) = 1;
        d(2, 2) = 0.5;
        PowerIterState<double> st;
        const MatX<double> out = spectral_normalize(d, 5, st);
        const double top = oracle::top_singular_value(out);
        CHECK(top == doctest::Approx(1.0).epsilon(0.02));
        CHECK(oracle::top_singular_value(d) == doctest::Approx(3.0));
    }
    SUBCASE("random 64x576 after 10 iterations lands in [0.98, 1.02]") {
        std::mt19937_64 rng(5150);
        std::normal_distribution<double> nd(0, 0.05);
        MatX<double> w(64, 576);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = nd(rng);
        PowerIterState<double> st;
        const MatX<double> out = spectral_normalize(w, 10, st);
        const double top = oracle::top_singular_value(out);
        CHECK(top >= 0.98);
        CHECK(top <= 1.02);
    }
    SUBCASE("random 512x4096 stays within the contract") {
        std::mt19937_64 rng(6160);
        std::normal_distribution<double> nd(0, 0.02);
        MatX<double> w(512, 4096);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = nd(rng);
        PowerIterState<double> st;
        const MatX<double> out = spectral_normalize(w, 10, st);
        const double top = oracle::top_singular_value(out);
        CHECK(top >= 0.98);
        CHECK(top <= 1.02);
    }
    SUBCASE("zero matrix is epsilon-guarded") {
        MatX<double> z = MatX<double>::Zero(4, 4);
        PowerIterState<double> st;
        const MatX<double> out = spectral_normalize(z, 3, st);
        CHECK(out.allFinite());
        CHECK(out.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("residual block: zero branch is the exact identity") {
    Sequential<float> net({residual_block_spec(16, NormKind::instance, 3)});
    for (auto& p : net.params()) p.value->fill(0.0f);
    auto x = oracle::random_tensor<float>({2, 16, 8, 8}, 71);
    const auto y = net.forward(x, true);
    CHECK(max_abs_diff(y, x) == 0.0f);
}

TEST_CASE("residual block keeps the printed bottleneck shape") {
    Sequential<float> net({residual_block_spec(256, NormKind::instance, 3)});
    he_init(net, 3);
    auto x = oracle::random_tensor<float>({1, 256, 16, 16}, 72);
    const auto y = net.forward(x, true);
    CHECK(y.shape() == std::vector<int>{1, 256, 16, 16});
}

TEST_CASE("gradient of |y|^2 through a zero-branch residual block is 2x") {
    Sequential<double> net({residual_block_spec(4, NormKind::instance, 3)});
    for (auto& p : net.params()) p.value->fill(0.0);
    auto x = oracle::random_tensor<double>({1, 4, 8, 8}, 73);
    const auto y = net.forward(x, true);
    Tensor<double> dy = y;
    for (std::size_t i = 0; i < dy.numel(); ++i) dy[i] *= 2.0;
    const auto gx = net.backward(dy);
    double worst = 0;
    for (std::size_t i = 0; i < gx.numel(); ++i)
        worst = std::max(worst, std::abs(gx[i] - 2.0 * x[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("block gradients match central finite differences") {
    struct Case {
        const char* name;
        std::vector<LayerSpec> chain;
        bool train;
    };
    const std::vector<Case> cases{
        {"conv s1", {conv_spec(3, 5, 3, 1, 1)}, true},
        {"conv s2", {conv_spec(4, 6, 4, 2, 1)}, true},
        {"conv 7x7", {conv_spec(2, 3, 7, 1, 3)}, true},
        {"transpose conv", {tconv_spec(6, 3, 4, 2, 1)}, true},
        {"batch norm (train)", {conv_spec(3, 4, 3, 1, 1), batch_norm_spec(4)}, true},
        {"batch norm (eval)", {conv_spec(3, 4, 3, 1, 1), batch_norm_spec(4)}, false},
        {"instance norm", {conv_spec(3, 4, 3, 1, 1), instance_norm_spec(4)}, true},
        {"leaky relu", {conv_spec(3, 4, 3, 1, 1), leaky_relu_spec(0.2)}, true},
        {"tanh", {conv_spec(3, 4, 3, 1, 1), tanh_spec()}, true},
        {"sigmoid", {conv_spec(3, 4, 3, 1, 1), sigmoid_spec()}, true},
        {"residual block", {residual_block_spec(4, NormKind::instance, 3)}, true},
        {"residual block bn", {residual_block_spec(4, NormKind::batch, 3)}, true},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        Sequential<double> net(c.chain);
        he_init(net, 1234);
        const int in_ch = c.chain.front().in_ch;
        auto x = oracle::random_tensor<double>({2, in_ch, 8, 8}, 900);
        const auto out_shape = shape_of(c.chain, {in_ch, 8, 8});
        auto probe =
            oracle::random_tensor<double>({2, out_shape[0], out_shape[1], out_shape[2]}, 901);
        CHECK(param_grad_check(net, x, probe, c.train, 20, 77) <= 1e-3);
        CHECK(input_grad_check(net, x, probe, c.train, 20, 78) <= 1e-3);
    }
}

TEST_CASE("optimizers implement their update rules") {
    SUBCASE("sgd with momentum and weight decay") {
        Tensor<float> w({1}), g({1});
        w[0] = 1.0f;
        g[0] = 0.5f;
        std::vector<ParamRef<float>> params{{"w", &w, &g}};
        SGD<float> opt(0.9f, 0.1f);
        opt.step(params, 0.1f);
        // g_eff = 0.5 + 0.1*1 = 0.6; v = 0.6; w = 1 - 0.06
        CHECK(w[0] == doctest::Approx(0.94f));
        opt.step(params, 0.1f);
        // g_eff = 0.5 + 0.094; v = 0.9*0.6 + 0.594; w -= 0.1*v
        CHECK(w[0] == doctest::Approx(0.94f - 0.1f * (0.54f + 0.594f)));
    }
    SUBCASE("adam first step is lr*sign(g) up to eps") {
        Tensor<float> w({1}), g({1});
        w[0] = 0.0f;
        g[0] = 3.0f;
        std::vector<ParamRef<float>> params{{"w", &w, &g}};
        Adam<float> opt(0.5f, 0.999f);
        opt.step(params, 0.01f);
        CHECK(w[0] == doctest::Approx(-0.01f).epsilon(1e-4));
    }
}

TEST_CASE("exponential lr schedule hits both endpoints") {
    CHECK(exp_lr_schedule(1e-1, 1e-4, 0, 50) == doctest::Approx(1e-1));
    CHECK(exp_lr_schedule(1e-1, 1e-4, 49, 50) == doctest::Approx(1e-4));
    CHECK(exp_lr_schedule(1e-1, 1e-4, 0, 1) == doctest::Approx(1e-1));
    // monotone decreasing
    double prev = 1;
    for (int e = 0; e < 50; ++e) {
        const double lr = exp_lr_schedule(1e-1, 1e-4, e, 50);
        CHECK(lr < prev);
        prev = lr;
    }
}

TEST_CASE("checkpoints restore networks bit-exactly") {
    namespace fs = std::filesystem;
    Sequential<float> net(discriminator_chain(DiscriminatorArch{.in_ch = 3, .base = 8}));
    he_init(net, 99);
    auto x = oracle::random_tensor<float>({1, 3, 64, 64}, 100);
    const auto y = net.forward(x, false);

    const auto path = (fs::temp_directory_path() / "fdi_ckpt_test.ckpt").string();
    snapshot_network(net, R"({"chain":[]})").save(path);
    const auto loaded = Checkpoint::load(path);
    CHECK(loaded.meta_json == R"({"chain":[]})");

    Sequential<float> net2(discriminator_chain(DiscriminatorArch{.in_ch = 3, .base = 8}));
    he_init(net2, 123456);
    restore_network(net2, loaded);
    const auto y2 = net2.forward(x, false);
    CHECK(max_abs_diff(y, y2) == 0.0f);
}

TEST_SUITE_END();
