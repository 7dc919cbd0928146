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

#include <cstdint>
#include <vector>

#include "primeseg/core.hpp"

namespace primeseg {

/// Which class id plays each scene role. Defaults follow ClassTable::highway().
struct SceneRoles {
    ClassId road = 0;
    ClassId lane = 1;
    ClassId sky = 2;
    ClassId fence = 3;
    ClassId car = 4;
    ClassId truck = 5;
    ClassId unknown = 6;

    /// Road, sky and the roadside fence wedges.
    std::vector<ClassId> large_background() const { return {road, sky, fence}; }
    std::vector<ClassId> thin_structure() const { return {lane}; }
    std::vector<ClassId> compact_movers() const { return {car, truck}; }
};

/// Highway-like synthetic scene: sky above a horizon, a road trapezoid flanked by fence,
/// slanted 1-2 px lane lines, rectangular cars and trucks moving at constant velocity,
/// and a fixed unknown band along the bottom edge.
struct SceneConfig {
    int width = 320;
    int height = 240;
    int num_frames = 60;
    double frame_rate = 30.0;
    std::uint64_t seed = 0;

    /// Unknown margin at the bottom; negative means height / 16.
    int bonnet_rows = -1;
    double horizon = 0.4;
    int num_cars = 2;
    int num_trucks = 1;
    /// Upper bound on mover speed in pixels per frame (at most 3).
    double max_speed = 1.5;
    /// Lateral road drift in pixels per frame.
    double lane_drift = 0.05;
    double noise_sigma = 0.08;
    /// Relative brightness change per frame.
    double brightness_drift = 0.002;
    SceneRoles roles;

    /// Throws UsageError for invalid dimensions or rates.
    void validate() const;
    int effective_bonnet_rows() const { return bonnet_rows < 0 ? height / 16 : bonnet_rows; }
    double unknown_fraction() const { return static_cast<double>(effective_bonnet_rows()) / height; }
};

/// Deterministic in the config; every frame is labeled.
VideoSequence generate(const SceneConfig& config);

/// `count` sequences named seq_000.. with per-sequence seeds derived from config.seed.
std::vector<VideoSequence> generate_dataset(const SceneConfig& config, int count);

/// Fraction of pixels with equal labels between frames t and t + lag, averaged over t.
double label_agreement(const VideoSequence& seq, int lag);

} // namespace primeseg
