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

#include "oracles/bilinear_oracle.hpp"
#include "primeseg/resample.hpp"
#include "unit/helpers.hpp"

using namespace primeseg;

namespace {

LabelMap iota_map(int h, int w) {
    LabelMap m(h, w);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.ids()[i] = static_cast<ClassId>(i);
    return m;
}

ScoreMap row(std::vector<double> v) {
    Tensor t(1, 1, static_cast<int>(v.size()));
    t.values = std::move(v);
    return ScoreMap(std::move(t));
}

} // namespace

TEST_CASE("nn_subsample anchors at the top-left") {
    const LabelMap m = iota_map(4, 4);
    const LabelMap s = nn_subsample(m, 2);
    CHECK(s == LabelMap(2, 2, {0, 2, 8, 10}));
    CHECK(nn_subsample(m, 1) == m);
    const LabelMap odd = nn_subsample(iota_map(3, 3), 2);
    CHECK(odd == LabelMap(2, 2, {0, 2, 6, 8}));
    CHECK_THROWS_AS(nn_subsample(m, 0), UsageError);
}

TEST_CASE("nn_upscale") {
    const LabelMap m = iota_map(2, 2);
    CHECK(nn_upscale(m, 4, 4) == LabelMap(4, 4, {0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3}));
    CHECK(nn_upscale(m, 2, 2) == m);
    CHECK(nn_upscale(m, 3, 3) == LabelMap(3, 3, {0, 0, 1, 0, 0, 1, 2, 2, 3}));
    CHECK_THROWS_AS(nn_upscale(m, 1, 2), UsageError);
}

TEST_CASE("sub-N round trip is idempotent") {
    const LabelMap m = testutil::random_labels(13, 11, 5, 3);
    for (int n : {2, 3, 4, 8}) {
        const LabelMap once = nn_upscale(nn_subsample(m, n), 13, 11);
        CHECK(nn_upscale(nn_subsample(once, n), 13, 11) == once);
    }
}

TEST_CASE("bilinear 1d example with clamping") {
    const ScoreMap out = bilinear_resize(row({0, 2}), 1, 4);
    CHECK(out.tensor().values == std::vector<double>{0, 0.5, 1.5, 2});
    CHECK_THROWS_AS(bilinear_resize(row({0, 2}), 0, 4), UsageError);
}

TEST_CASE("bilinear keeps constants and identity") {
    const Tensor c(2, 3, 5, 0.25);
    const Tensor r = resize_bilinear(c, 7, 2);
    for (double v : r.values)
        CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
    const Tensor t = testutil::random_tensor(3, 5, 7, 1);
    const Tensor same = resize_bilinear(t, 5, 7);
    for (std::size_t i = 0; i < t.size(); ++i)
        CHECK(std::abs(same.values[i] - t.values[i]) < 1e-12);
}

TEST_CASE("bilinear matches direct formula evaluation and stays in range") {
    const Tensor t = testutil::random_tensor(2, 5, 7, 42);
    for (auto [th, tw] : {std::pair{11, 3}, std::pair{2, 13}, std::pair{5, 7}, std::pair{9, 14}}) {
        const Tensor r = resize_bilinear(t, th, tw);
        for (int c = 0; c < 2; ++c) {
            const std::vector<double> plane(t.plane(c).begin(), t.plane(c).end());
            const auto [lo, hi] = std::minmax_element(plane.begin(), plane.end());
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < tw; ++x) {
                    CHECK(std::abs(r.at(c, y, x) - oracle::bilinear_at(plane, 5, 7, th, tw, y, x)) < 1e-9);
                    CHECK(r.at(c, y, x) >= *lo - 1e-12);
                    CHECK(r.at(c, y, x) <= *hi + 1e-12);
                }
        }
    }
}

TEST_CASE("bilinear adjoint satisfies <Ax, y> = <x, A^T y>") {
    const Tensor x = testutil::random_tensor(2, 4, 6, 5);
    const Tensor y = testutil::random_tensor(2, 9, 5, 6);
    const Tensor ax = resize_bilinear(x, 9, 5);
    const Tensor aty = resize_bilinear_adjoint(y, 4, 6);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i)
        lhs += ax.values[i] * y.values[i];
    for (std::size_t i = 0; i < x.size(); ++i)
        rhs += x.values[i] * aty.values[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("downsample_image") {
    const Image img = testutil::random_image(6, 5, 2);
    const Image same = downsample_image(img, 1);
    for (std::size_t i = 0; i < img.tensor().size(); ++i)
        CHECK(std::abs(same.tensor().values[i] - img.tensor().values[i]) < 1e-12);

    const Image half = downsample_image(Image(Tensor(3, 4, 4, 0.3)), 2);
    CHECK(half.height() == 2);
    CHECK(half.width() == 2);
    for (double v : half.tensor().values)
        CHECK(v == doctest::Approx(0.3).epsilon(1e-15));

    Tensor ramp(3, 1, 4);
    for (int c = 0; c < 3; ++c)
        for (int x = 0; x < 4; ++x)
            ramp.at(c, 0, x) = x / 3.0;
    const Image r = downsample_image(Image(ramp), 2);
    CHECK(r.tensor().at(0, 0, 0) * 3.0 == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r.tensor().at(0, 0, 1) * 3.0 == doctest::Approx(2.5).epsilon(1e-14));

    CHECK(downsample_image(testutil::random_image(7, 9, 1), 4).height() == 2);
    CHECK(downsample_image(testutil::random_image(7, 9, 1), 4).width() == 3);
    CHECK_THROWS_AS(downsample_image(img, 0), UsageError);
}
