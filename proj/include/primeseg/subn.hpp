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

#include <ostream>
#include <span>
#include <vector>

#include "primeseg/core.hpp"
#include "primeseg/metrics.hpp"

namespace primeseg {

// Labeling ceiling of pure downsampling: ground truth subsampled with stride N,
// nearest-neighbor upscaled back and scored against itself.

inline const std::vector<int> kDefaultSubNStrides = {2, 4, 8, 16, 32};

struct SubNReport {
    int stride = 1;
    ConfusionMatrix confusion;
    MetricsReport metrics;
};

LabelMap subn_round_trip(const LabelMap& labels, int stride);

/// One aggregated report per stride, in the order given. `threads` > 1 splits the maps
/// across workers; the merge order is fixed so results do not depend on it.
std::vector<SubNReport> run_subn(std::span<const LabelMap> dataset, std::span<const int> strides,
                                 const ClassTable& table, int threads = 1);

/// CSV: one row per stride with per-class IoU columns, then mIoU.
void write_subn_csv(std::ostream& os, std::span<const SubNReport> reports, const ClassTable& table);

} // namespace primeseg
