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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "primeseg/nn.hpp"
#include "primeseg/pipeline.hpp"

namespace primeseg::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Parses and runs one command line (without the program name). Errors are reported on
/// `err` and mapped to exit codes; nothing is thrown.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Cost model file: JSON object with cost_prime, cost_approx, cost_ensemble and provenance.
CostModel read_cost_model(const std::filesystem::path& path);
void write_cost_model(const std::filesystem::path& path, const CostModel& costs);

/// Settings read from the --config file. Missing keys keep their defaults.
struct TrainingSettings {
    nn::TrainConfig priming;
    nn::TrainConfig joint;
    ScheduleConfig schedule;
    JointOptions joint_options;
};

TrainingSettings default_training_settings();
TrainingSettings read_training_settings(const std::filesystem::path& path);

} // namespace primeseg::cli
