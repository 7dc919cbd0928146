// Copyright 2026 The primeseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles/conv_oracle.hpp"
#include "oracles/layer_gradcheck.hpp"
#include "primeseg/nn.hpp"
#include "unit/helpers.hpp"

using namespace primeseg;
using nn::LayerSpec;
using nn::NetSpec;

namespace {

NetSpec single(int in, LayerSpec l) { return NetSpec{"t", in, {l}}; }

void require_grads(const std::vector<oracle::GradCheck>& checks) {
    for (const auto& c : checks) {
        INFO(c.what);
        CHECK(c.rel_error < 1e-4);
    }
}

} // namespace

TEST_CASE("identity 1x1 conv") {
    const NetSpec s = single(3, LayerSpec::conv(3, 3, 1));
    nn::NetParams p = nn::NetParams::zeros_like(s);
    for (int c = 0; c < 3; ++c)
        p.convs[0].w(c, c, 0, 0) = 1.0;
    const Tensor x = testutil::random_tensor(3, 5, 4, 1);
    CHECK(nn::forward(s, p, x) == x);
}

TEST_CASE("zero weights give the bias") {
    const NetSpec s = single(2, LayerSpec::conv(2, 3, 3));
    nn::NetParams p = nn::NetParams::zeros_like(s);
    p.convs[0].bias = {0.5, -1.0, 2.0};
    const Tensor out = nn::forward(s, p, testutil::random_tensor(2, 4, 4, 2));
    for (int c = 0; c < 3; ++c)
        for (double v : out.plane(c))
            CHECK(v == p.convs[0].bias[c]);
}

TEST_CASE("two-layer net matches the naive convolution oracle") {
    const NetSpec s{"golden", 3, {LayerSpec::conv(3, 4, 3), LayerSpec::relu(), LayerSpec::conv(4, 2, 3, 2)}};
    const nn::NetParams p = nn::init_params(s, 2024);
    const Tensor x = testutil::random_tensor(3, 8, 8, 99);
    const Tensor out = nn::forward(s, p, x);
    auto h = oracle::relu(oracle::conv2d(x.values, 3, 8, 8, p.convs[0].weights, p.convs[0].bias, 4, 3, 1));
    const auto want = oracle::conv2d(h, 4, 8, 8, p.convs[1].weights, p.convs[1].bias, 2, 3, 2);
    REQUIRE(out.values.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(std::abs(out.values[i] - want[i]) < 1e-9);
}

TEST_CASE("dilated conv spreads an impulse at the dilation spacing") {
    for (int d : {1, 2, 3}) {
        const NetSpec s = single(1, LayerSpec::conv(1, 1, 3, d));
        nn::NetParams p = nn::init_params(s, 5);
        Tensor x(1, 9, 9);
        x.at(0, 4, 4) = 1.0;
        const Tensor out = nn::forward(s, p, x);
        for (int y = 0; y < 9; ++y)
            for (int xx = 0; xx < 9; ++xx) {
                const int dy = 4 - y, dx = 4 - xx;
                double want = 0.0;
                if (dy % d == 0 && dx % d == 0 && std::abs(dy / d) <= 1 && std::abs(dx / d) <= 1)
                    want = p.convs[0].w(0, 0, dy / d + 1, dx / d + 1);
                CHECK(out.at(0, y, xx) == want);
            }
    }
}

TEST_CASE("conv stack is translation consistent away from borders") {
    const NetSpec s{"shift", 2, {LayerSpec::conv(2, 3, 3), LayerSpec::relu(), LayerSpec::conv(3, 2, 3, 2)}};
    const nn::NetParams p = nn::init_params(s, 8);
    Tensor x = testutil::random_tensor(2, 12, 12, 3);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 12; ++y)
            x.at(c, y, 11) = 0.0;
    Tensor shifted(2, 12, 12);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 12; ++y)
            for (int xx = 1; xx < 12; ++xx)
                shifted.at(c, y, xx) = x.at(c, y, xx - 1);
    const Tensor a = nn::forward(s, p, x), b = nn::forward(s, p, shifted);
    const int border = 3; // receptive radius 1 + 2
    for (int c = 0; c < 2; ++c)
        for (int y = border; y < 12 - border; ++y)
            for (int xx = border; xx < 12 - border - 1; ++xx)
                CHECK(std::abs(b.at(c, y, xx + 1) - a.at(c, y, xx)) < 1e-12);
}

TEST_CASE("downsample and upsample shapes") {
    const NetSpec down = single(2, LayerSpec::downsample2());
    CHECK(down.output_dims(7, 5) == std::pair{4, 3});
    const Tensor out = nn::forward(down, {}, Tensor(2, 3, 3, 1.0));
    CHECK(out.height == 2);
    for (double v : out.values)
        CHECK(v == 1.0);
    const NetSpec up = single(1, LayerSpec::bilinear_up(3));
    CHECK(up.output_dims(2, 5) == std::pair{6, 15});
}

TEST_CASE("forward rejects bad inputs") {
    const NetSpec s = single(3, LayerSpec::conv(3, 2, 1));
    const nn::NetParams p = nn::init_params(s, 1);
    CHECK_THROWS_AS(nn::forward(s, p, Tensor(2, 3, 3)), DataError);
    nn::NetParams bad = p;
    bad.convs[0].bias[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(nn::forward(s, bad, Tensor(3, 3, 3)), NumericError);
    const NetSpec cat{"cat", 2, {LayerSpec::concat_input(1)}};
    CHECK_THROWS_AS(nn::forward(cat, {}, Tensor(2, 3, 3)), DataError);
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS((NetSpec{"x", 3, {LayerSpec::conv(4, 2)}}.validate()), UsageError);
    CHECK_THROWS_AS((NetSpec{"x", 3, {LayerSpec::conv(3, 2, 5)}}.validate()), UsageError);
    CHECK_THROWS_AS((NetSpec{"x", 3, {LayerSpec::conv(3, 2, 3, 0)}}.validate()), UsageError);
    CHECK(nn::default_priming_spec(6).output_channels() == 6);
    CHECK(nn::default_priming_spec(6).num_convs() == 8);
    CHECK(nn::default_approximating_spec(6).num_convs() == 4);
    CHECK(nn::default_ensemble_spec(6).num_side_inputs() == 1);
    CHECK(nn::default_priming_spec(6).output_dims(64, 96) == std::pair{64, 96});
}

TEST_CASE("layer gradients match central differences") {
    SUBCASE("conv 3x3") { require_grads(oracle::check_spec(single(3, LayerSpec::conv(3, 4, 3)), 6, 5, {}, 1)); }
    SUBCASE("conv 1x1") { require_grads(oracle::check_spec(single(4, LayerSpec::conv(4, 2, 1)), 8, 8, {}, 2)); }
    SUBCASE("dilated conv") { require_grads(oracle::check_spec(single(2, LayerSpec::conv(2, 3, 3, 2)), 7, 8, {}, 3)); }
    SUBCASE("relu") { require_grads(oracle::check_spec(single(4, LayerSpec::relu()), 8, 8, {}, 4)); }
    SUBCASE("downsample odd size") {
        require_grads(oracle::check_spec(single(3, LayerSpec::downsample2()), 7, 5, {}, 5));
    }
    SUBCASE("bilinear up") { require_grads(oracle::check_spec(single(2, LayerSpec::bilinear_up(2)), 3, 4, {}, 6)); }
    SUBCASE("concat") {
        const NetSpec s{"cat", 2, {LayerSpec::concat_input(3), LayerSpec::conv(5, 2, 3)}};
        require_grads(oracle::check_spec(s, 6, 6, {3}, 7));
    }
    SUBCASE("default ensemble") {
        require_grads(oracle::check_spec(nn::default_ensemble_spec(4), 6, 7, {4}, 8));
    }
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
    const NetSpec s = nn::default_approximating_spec(3);
    const nn::NetParams p = nn::init_params(s, 3);
    nn::ForwardCache cache;
    const Tensor out = nn::forward(s, p, testutil::random_tensor(3, 6, 6, 1), {}, &cache);
    const auto g = nn::backward(s, p, cache, Tensor(out.channels, out.height, out.width));
    CHECK(g.params.squared_norm() == 0.0);
    CHECK_THROWS_AS(nn::backward(s, p, nn::ForwardCache{}, out), UsageError);
}

TEST_CASE("relu passes positive gradients through") {
    const NetSpec s = single(1, LayerSpec::relu());
    nn::ForwardCache cache;
    Tensor x(1, 1, 2);
    x.values = {0.7, -0.3};
    nn::forward(s, {}, x, {}, &cache);
    Tensor g(1, 1, 2);
    g.values = {2.5, 4.0};
    const auto r = nn::backward(s, {}, cache, g);
    CHECK(r.input.values[0] == 2.5);
    CHECK(r.input.values[1] == 0.0);
}

TEST_CASE("masked cross-entropy") {
    const ClassTable t = testutil::ab_table();
    SUBCASE("uniform scores") {
        const auto r = nn::masked_cross_entropy(Tensor(2, 1, 1), LabelMap(1, 1, 0), t);
        CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    }
    SUBCASE("all unknown") {
        const auto r = nn::masked_cross_entropy(testutil::random_tensor(2, 3, 3, 1), LabelMap(3, 3, 2), t);
        CHECK(r.loss == 0.0);
        for (double v : r.grad.values)
            CHECK(v == 0.0);
    }
    SUBCASE("finite differences on a random 4x4 case") {
        LabelMap gt = testutil::random_labels(4, 4, 3, 12);
        CHECK(oracle::check_loss(2, 4, 4, gt, t, 13) < 1e-4);
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(nn::masked_cross_entropy(Tensor(2, 2, 2), LabelMap(2, 3), t), DataError);
    }
}

TEST_CASE("softmax backward matches central differences") {
    Tensor s = testutil::random_tensor(4, 3, 3, 21);
    const Tensor readout = testutil::random_tensor(4, 3, 3, 22);
    const Tensor g = nn::softmax_channels_backward(nn::softmax_channels(s), readout);
    const double err = oracle::gradient_error(s.values, g.values, [&] {
        const Tensor p = nn::softmax_channels(s);
        double v = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i)
            v += p.values[i] * readout.values[i];
        return v;
    });
    CHECK(err < 1e-4);
}

TEST_CASE("sgd momentum") {
    const NetSpec s = single(1, LayerSpec::conv(1, 1, 1));
    nn::NetParams p = nn::NetParams::zeros_like(s);
    nn::NetParams g = nn::NetParams::zeros_like(s);
    g.convs[0].weights[0] = 2.0;
    nn::TrainConfig c;
    c.learning_rate = 0.1;

    SUBCASE("no momentum") {
        c.momentum = 0.0;
        nn::SgdMomentum opt(s);
        opt.step(p, g, c);
        CHECK(p.convs[0].weights[0] == doctest::Approx(-0.2));
        const nn::NetParams before = p;
        opt.step(p, nn::NetParams::zeros_like(s), c);
        CHECK(p == before);
    }
    SUBCASE("heavy ball") {
        c.momentum = 0.9;
        nn::SgdMomentum opt(s);
        opt.step(p, g, c);
        const double first = p.convs[0].weights[0];
        opt.step(p, g, c);
        CHECK(p.convs[0].weights[0] - first == doctest::Approx(-1.9 * 0.1 * 2.0));
    }
    SUBCASE("clipping") {
        c.momentum = 0.0;
        c.clip_norm = 0.5;
        nn::SgdMomentum opt(s);
        opt.step(p, g, c);
        CHECK(p.convs[0].weights[0] == doctest::Approx(-0.05));
    }
    SUBCASE("shape mismatch") {
        nn::SgdMomentum opt(s);
        CHECK_THROWS_AS(opt.step(p, nn::NetParams::zeros_like(single(1, LayerSpec::conv(1, 2, 1))), c), DataError);
    }
}

TEST_CASE("init params") {
    const NetSpec s = nn::default_priming_spec(6);
    CHECK(nn::init_params(s, 1) == nn::init_params(s, 1));
    CHECK_FALSE(nn::init_params(s, 1) == nn::init_params(s, 2));
    const nn::NetParams p = nn::init_params(s, 7);
    for (const auto& cw : p.convs) {
        for (double b : cw.bias)
            CHECK(b == 0.0);
        if (cw.weights.size() < 1000)
            continue;
        double sum = 0.0, sq = 0.0;
        for (double w : cw.weights) {
            sum += w;
            sq += w * w;
        }
        const double n = static_cast<double>(cw.weights.size());
        const double var = sq / n - (sum / n) * (sum / n);
        const double want = 2.0 / (cw.in_channels * cw.kernel * cw.kernel);
        CHECK(var == doctest::Approx(want).epsilon(0.2));
    }
}

TEST_CASE("training loss falls on a fixed batch") {
    const ClassTable t = testutil::abc_table();
    for (const NetSpec& s : {nn::default_approximating_spec(3), nn::default_priming_spec(3)}) {
        nn::NetParams p = nn::init_params(s, 3);
        const Tensor x = testutil::random_tensor(3, 12, 12, 5, 0.0, 1.0);
        LabelMap gt(12, 12, 0);
        for (int y = 0; y < 12; ++y)
            for (int xx = 0; xx < 12; ++xx)
                gt.at(y, xx) = static_cast<ClassId>(x.at(0, y, xx) > 0.5 ? 1 : (x.at(1, y, xx) > 0.5 ? 2 : 0));
        nn::SgdMomentum opt(s);
        nn::TrainConfig c;
        double first = 0.0, last = 0.0;
        for (int step = 0; step < 50; ++step) {
            nn::ForwardCache cache;
            const Tensor out = nn::forward(s, p, x, {}, &cache);
            const auto loss = nn::masked_cross_entropy(out, gt, t);
            if (step == 0)
                first = loss.loss;
            last = loss.loss;
            opt.step(p, nn::backward(s, p, cache, loss.grad).params, c);
        }
        INFO(s.name);
        CHECK(last < first);
    }
}

TEST_CASE("checkpoint round trip and spec mismatch") {
    const auto dir = std::filesystem::temp_directory_path() / "primeseg_nn_ckpt";
    std::filesystem::create_directories(dir);
    const NetSpec s = nn::default_approximating_spec(6);
    const nn::NetParams p = nn::init_params(s, 11);
    nn::save_checkpoint(dir / "a.ckpt", s, p);
    CHECK(nn::load_checkpoint(dir / "a.ckpt", s) == p);
    CHECK_THROWS_AS(nn::load_checkpoint(dir / "a.ckpt", nn::default_approximating_spec(5)), DataError);
    CHECK_THROWS_AS(nn::load_checkpoint(dir / "missing.ckpt", s), DataError);
    {
        std::ofstream os(dir / "junk.ckpt", std::ios::binary);
        os << "not a checkpoint";
    }
    CHECK_THROWS_AS(nn::load_checkpoint(dir / "junk.ckpt", s), DataError);
    std::filesystem::remove_all(dir);
}
