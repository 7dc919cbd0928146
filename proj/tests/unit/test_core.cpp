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

#include "primeseg/core.hpp"
#include "unit/helpers.hpp"

using namespace primeseg;
using testutil::ab_table;

namespace {

ScoreMap scores_1x1(std::vector<double> v) {
    Tensor t(static_cast<int>(v.size()), 1, 1);
    t.values = std::move(v);
    return ScoreMap(std::move(t));
}

} // namespace

TEST_CASE("class table rejects malformed tables") {
    CHECK_THROWS_AS(ClassTable({{0, "a", {}}, {2, "b", {}}, {1, "u", {}}}, 1), UsageError);
    CHECK_THROWS_AS(ClassTable({{0, "a", {}}, {1, "u", {}}}, 1), UsageError);
    CHECK_THROWS_AS(ClassTable({{0, "a", {}}, {1, "b", {}}, {2, "c", {}}}, 5), UsageError);
    const ClassTable t = ab_table();
    CHECK(t.num_scored() == 2);
    CHECK(t.find_name("b") == ClassId{1});
    CHECK(t.find_color({0, 0, 0}) == ClassId{2});
    CHECK_FALSE(t.find_color({1, 2, 3}).has_value());
}

TEST_CASE("channels skip the unknown class") {
    const ClassTable t({{0, "a", {}}, {1, "u", {}}, {2, "b", {}}}, 1);
    CHECK(t.channel_of(0) == 0);
    CHECK(t.channel_of(2) == 1);
    CHECK(t.id_of_channel(1) == 2);
}

TEST_CASE("argmax picks the single maximum") {
    CHECK(argmax_labels(scores_1x1({0.1, 0.9}), ab_table()).at(0, 0) == 1);
}

TEST_CASE("argmax ties go to the lowest id") {
    CHECK(argmax_labels(scores_1x1({0.5, 0.5}), ab_table()).at(0, 0) == 0);
}

TEST_CASE("argmax on a 2x1 map") {
    Tensor t(2, 2, 1);
    t.at(0, 0, 0) = 3;
    t.at(1, 0, 0) = 1;
    t.at(0, 1, 0) = -1;
    t.at(1, 1, 0) = 2;
    const LabelMap m = argmax_labels(ScoreMap(t), ab_table());
    CHECK(m.at(0, 0) == 0);
    CHECK(m.at(1, 0) == 1);
}

TEST_CASE("argmax rejects a class-count mismatch") {
    CHECK_THROWS_AS(argmax_labels(scores_1x1({1, 2, 3}), ab_table()), DataError);
}

TEST_CASE("argmax is invariant to a per-pixel constant shift") {
    const ClassTable t = testutil::abc_table();
    Tensor s = testutil::random_tensor(3, 9, 7, 11);
    const LabelMap base = argmax_labels(ScoreMap(s), t);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-50, 50);
    for (std::size_t i = 0; i < s.plane_size(); ++i) {
        const double shift = u(rng);
        for (int c = 0; c < 3; ++c)
            s.values[c * s.plane_size() + i] += shift;
    }
    CHECK(argmax_labels(ScoreMap(s), t) == base);
    CHECK(argmax_labels(ScoreMap(s), t) == argmax_labels(ScoreMap(s), t));
}

TEST_CASE("one-hot then argmax is the identity without unknown pixels") {
    const ClassTable t = testutil::abc_table();
    const LabelMap m = testutil::random_labels(12, 5, 3, 5);
    CHECK(argmax_labels(one_hot(m, t), t) == m);
}

TEST_CASE("validate_sequence") {
    const ClassTable t = ab_table();
    VideoSequence s = testutil::random_sequence(2, 4, 5, 3, 1);
    CHECK(validate_sequence(s, t).empty());

    SUBCASE("dimension change at frame 1") {
        s.frames[1].image = testutil::random_image(4, 6, 9);
        s.frames[1].label = testutil::random_labels(4, 6, 3, 9);
        const auto v = validate_sequence(s, t);
        REQUIRE(v.size() == 2);
        for (const auto& x : v) {
            CHECK(x.frame == 1);
            CHECK(x.rule == "dimension");
        }
    }
    SUBCASE("label id outside the table") {
        s.frames[0].label->at(2, 3) = 99;
        const auto v = validate_sequence(s, t);
        REQUIRE(v.size() == 1);
        CHECK(v[0].rule == "label_id");
        CHECK(v[0].detail.find("99") != std::string::npos);
    }
    SUBCASE("timestamps must increase") {
        s.frames[1].timestamp = s.frames[0].timestamp;
        const auto v = validate_sequence(s, t);
        REQUIRE(v.size() == 1);
        CHECK(v[0].rule == "timestamp");
    }
    SUBCASE("frame rate must be positive") {
        s.frame_rate = 0.0;
        REQUIRE_FALSE(validate_sequence(s, t).empty());
        CHECK(validate_sequence(s, t)[0].rule == "frame_rate");
    }
}

TEST_CASE("image and score map value checks") {
    Tensor t(3, 2, 2, 0.5);
    t.values[3] = 1.5;
    CHECK_THROWS_AS(Image{t}, DataError);
    CHECK_THROWS_AS(Image{Tensor(2, 2, 2, 0.5)}, DataError);
    Tensor s(2, 1, 1);
    s.values[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ScoreMap{s}, NumericError);
}
