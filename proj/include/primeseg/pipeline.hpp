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

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "primeseg/core.hpp"
#include "primeseg/nn.hpp"

namespace primeseg {

/// Priming schedule: frame t is primed iff t % period == 0. Without a period only frame 0 is.
struct ScheduleConfig {
    std::optional<int> priming_period;
    int downsample_factor = 4;

    void validate() const;
    bool is_primed(int frame_index) const {
        return frame_index == 0 || (priming_period && frame_index % *priming_period == 0);
    }
};

/// "inf" for an unbounded period, else the number.
std::string period_label(const std::optional<int>& period);
/// Accepts a positive integer, "inf" or "none". Throws UsageError otherwise.
std::optional<int> parse_period(const std::string& text);

/// Per-frame cost of each network in one consistent unit.
struct CostModel {
    double cost_prime = 1.0;
    double cost_approx = 1.0;
    double cost_ensemble = 1.0;
    std::string provenance = "unspecified";

    void validate() const;
    double recurrent_cost() const { return cost_approx + cost_ensemble; }
};

struct Network {
    nn::NetSpec spec;
    nn::NetParams params;
};

struct PipelineNets {
    Network priming;
    Network approximating;
    Network ensemble;

    /// Throws DataError if any net's class count disagrees with the table or the ensemble
    /// does not take (previous scores, upsampled scores).
    void validate(const ClassTable& table) const;
};

/// Priming output at frame resolution.
ScoreMap run_priming(const Network& priming, const Image& frame);
/// Approximating output on the downsampled frame, bilinearly resized to frame resolution.
ScoreMap run_approximating(const Network& approximating, const Image& frame, int downsample_factor);
/// The previous scores enter the ensemble as per-pixel softmax probabilities.
ScoreMap run_ensemble(const Network& ensemble, const ScoreMap& previous, const ScoreMap& upsampled);

/// Frame-by-frame recurrent segmenter holding the previous frame's scores.
class RecurrentSegmenter {
public:
    RecurrentSegmenter(const PipelineNets& nets, ScheduleConfig schedule, const ClassTable& table);

    struct Step {
        ScoreMap scores;
        bool primed = false;
    };

    Step step(const Image& frame);
    void reset();
    int frames_seen() const { return frame_index_; }

private:
    const PipelineNets& nets_;
    ScheduleConfig schedule_;
    int frame_index_ = 0;
    std::optional<ScoreMap> previous_;
};

struct SequenceResult {
    std::vector<LabelMap> labels;
    std::vector<ScoreMap> scores;
    std::vector<bool> primed;
    std::vector<double> cost_trace;
};

SequenceResult segment_sequence(const VideoSequence& seq, const PipelineNets& nets, const ScheduleConfig& schedule,
                                const ClassTable& table, const CostModel& costs);

/// Frame-independent labels from the approximating net alone (no recurrence).
std::vector<LabelMap> segment_approximating_only(const VideoSequence& seq, const Network& approximating,
                                                 int downsample_factor, const ClassTable& table);

/// Scheduled cost of `length` frames divided by length * cost_prime.
double amortized_relative_runtime(const ScheduleConfig& schedule, const CostModel& costs, int length);

struct BudgetPoint {
    std::optional<int> period;
    double relative_runtime = 0.0;
};

std::vector<BudgetPoint> budget_curve(const CostModel& costs, std::span<const std::optional<int>> periods, int length);

void write_budget_csv(std::ostream& os, std::span<const BudgetPoint> curve, const CostModel& costs);
/// Rows: sequence, frame, primed, cost.
void write_cost_trace_csv(std::ostream& os, std::span<const std::string> sequence_names,
                          std::span<const SequenceResult> results);

/// Median wall time of `repeats` runs of each network on a fixed seeded frame, in seconds.
CostModel calibrate_cost_model(const PipelineNets& nets, int height, int width, int downsample_factor,
                               int repeats = 30);
/// Multiply-accumulate counts of each network at the given resolution.
CostModel analytic_cost_model(const PipelineNets& nets, int height, int width, int downsample_factor);

/// Ensemble parameters whose output equals the upsampled approximating scores. Needs the
/// default layout (concat, 3x3 conv to at least 2C hidden units, relu, 1x1 conv); units beyond
/// 2C keep their seeded random input weights and start with zero output weights.
nn::NetParams passthrough_ensemble_params(const nn::NetSpec& spec, std::uint64_t seed);

// --- Training ---------------------------------------------------------------

/// Called after each epoch with (epoch index, mean loss).
using EpochCallback = std::function<void(int, double)>;

struct TrainResult {
    nn::NetParams params;
    std::vector<double> epoch_loss;
};

/// Frame-independent training of the priming net on every training frame.
/// Throws DataError on an unlabeled frame and UsageError on an empty set.
TrainResult train_priming(std::span<const VideoSequence> train_set, const nn::NetSpec& spec,
                          const nn::TrainConfig& config, const ClassTable& table,
                          const EpochCallback& on_epoch = {});

/// Frame-independent training of the approximating net with its upsampled output as the prediction.
TrainResult train_approximating_only(std::span<const VideoSequence> train_set, const nn::NetSpec& spec,
                                     int downsample_factor, const nn::TrainConfig& config, const ClassTable& table,
                                     const EpochCallback& on_epoch = {});

struct JointOptions {
    /// Number of recurrent steps gradients flow back through; 1 treats previous scores as constant.
    int unroll_length = 1;
    /// Start the ensemble from passthrough_ensemble_params instead of a random init.
    bool passthrough_init = true;
};

struct JointResult {
    nn::NetParams approximating;
    nn::NetParams ensemble;
    std::vector<double> epoch_loss;
};

/// Trains approximating and ensemble nets together by running the pipeline in schedule order
/// with the priming net frozen. The loss is applied at every non-primed frame.
JointResult train_joint(std::span<const VideoSequence> train_set, const Network& priming, Network approximating,
                        Network ensemble, const ScheduleConfig& schedule, const nn::TrainConfig& config,
                        const ClassTable& table, const JointOptions& options = {},
                        const EpochCallback& on_epoch = {});

/// As above, initializing both nets from config.seed.
JointResult train_joint(std::span<const VideoSequence> train_set, const Network& priming,
                        const nn::NetSpec& approximating_spec, const nn::NetSpec& ensemble_spec,
                        const ScheduleConfig& schedule, const nn::TrainConfig& config, const ClassTable& table,
                        const JointOptions& options = {}, const EpochCallback& on_epoch = {});

} // namespace primeseg
