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

#include "primeseg/metrics.hpp"
#include "primeseg/synthgen.hpp"

using namespace primeseg;

TEST_CASE("generation is deterministic in the seed") {
    SceneConfig c;
    c.width = 48;
    c.height = 32;
    c.num_frames = 5;
    c.seed = 12;
    CHECK(generate(c) == generate(c));
    SceneConfig d = c;
    d.seed = 13;
    CHECK_FALSE(generate(c) == generate(d));
    CHECK(generate_dataset(c, 3) == generate_dataset(c, 3));
    CHECK(generate_dataset(c, 3)[2].name == "seq_002");
}

TEST_CASE("static scene keeps identical labels") {
    SceneConfig c;
    c.width = 64;
    c.height = 48;
    c.num_frames = 8;
    c.max_speed = 0.0;
    c.lane_drift = 0.0;
    const auto s = generate(c);
    for (const auto& f : s.frames)
        CHECK(*f.label == *s.frames[0].label);
}

TEST_CASE("default scenes are temporally correlated") {
    const auto s = generate(SceneConfig{});
    const double lag1 = label_agreement(s, 1);
    CHECK(lag1 >= 0.95);
    CHECK(label_agreement(s, 30) < lag1);
    double prev = 1.0;
    for (int lag = 0; lag < 40; lag += 3) {
        const double a = label_agreement(s, lag);
        CHECK(a <= prev + 1e-12);
        prev = a;
    }
}

TEST_CASE("every role is drawn and the unknown band is exact") {
    SceneConfig c;
    c.num_frames = 2;
    const auto s = generate(c);
    const ClassTable t = ClassTable::highway();
    CHECK(validate_sequence(s, t).empty());
    std::vector<int> seen(t.size(), 0);
    for (ClassId id : s.frames[0].label->ids())
        seen[id] = 1;
    for (int v : seen)
        CHECK(v == 1);
    std::vector<LabelMap> maps;
    for (const auto& f : s.frames)
        maps.push_back(*f.label);
    CHECK(spatial_density(maps, t) == 1.0 - c.unknown_fraction());
    CHECK(temporal_density(s) == c.frame_rate);
}

TEST_CASE("invalid configs") {
    SceneConfig c;
    c.width = 4;
    CHECK_THROWS_AS(generate(c), UsageError);
    c = SceneConfig{};
    c.num_frames = 1;
    CHECK_THROWS_AS(generate(c), UsageError);
    c = SceneConfig{};
    c.max_speed = 4.0;
    CHECK_THROWS_AS(generate(c), UsageError);
    c = SceneConfig{};
    c.frame_rate = 0.0;
    CHECK_THROWS_AS(generate(c), UsageError);
}
