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

#pragma once

#include <random>

#include "primeseg/core.hpp"

namespace testutil {

using namespace primeseg;

// Classes a, b, c plus unknown (id 3).
inline ClassTable abc_table() {
    return ClassTable({{0, "a", {255, 0, 0}}, {1, "b", {0, 255, 0}}, {2, "c", {0, 0, 255}}, {3, "unknown", {0, 0, 0}}},
                      3);
}

inline ClassTable ab_table() {
    return ClassTable({{0, "a", {255, 0, 0}}, {1, "b", {0, 255, 0}}, {2, "unknown", {0, 0, 0}}}, 2);
}

inline Tensor random_tensor(int c, int h, int w, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(c, h, w);
    for (double& v : t.values)
        v = u(rng);
    return t;
}

inline Image random_image(int h, int w, std::uint64_t seed) {
    Tensor t = random_tensor(3, h, w, seed, 0.0, 1.0);
    for (double& v : t.values)
        v = std::round(v * 255.0) / 255.0;
    return Image(std::move(t));
}

inline LabelMap random_labels(int h, int w, int num_ids, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> d(0, num_ids - 1);
    LabelMap m(h, w);
    for (auto& v : m.ids())
        v = static_cast<ClassId>(d(rng));
    return m;
}

inline VideoSequence random_sequence(int frames, int h, int w, int num_ids, std::uint64_t seed,
                                     double rate = 30.0) {
    VideoSequence s;
    s.name = "seq";
    s.frame_rate = rate;
    for (int t = 0; t < frames; ++t)
        s.frames.push_back({random_image(h, w, seed + 2 * t), random_labels(h, w, num_ids, seed + 2 * t + 1), t / rate});
    return s;
}

} // namespace testutil
