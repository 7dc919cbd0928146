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
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "primeseg/core.hpp"

namespace primeseg {

/// Integer pixel counts indexed by score channel: row = ground truth, column = prediction.
///
/// `missed` holds ground-truth pixels whose prediction was the unknown class. Those
/// only arise from label-space oracles (sub-N round trips); network predictions never
/// carry the unknown id. They count as false negatives of the ground-truth class.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int num_classes);

    int num_classes() const { return n_; }
    std::uint64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * n_ + pred]; }
    std::uint64_t& at(int gt, int pred) { return counts_[static_cast<std::size_t>(gt) * n_ + pred]; }
    std::uint64_t missed(int gt) const { return missed_[gt]; }
    std::uint64_t& missed(int gt) { return missed_[gt]; }

    std::uint64_t row_sum(int gt) const;
    std::uint64_t column_sum(int pred) const;
    std::uint64_t total() const;

    /// Adds the counts for one gt/pred pair. Pixels with unknown gt are skipped.
    /// Throws DataError on dimension mismatch or an unknown id in `pred`.
    void accumulate(const LabelMap& gt, const LabelMap& pred, const ClassTable& table);
    /// As accumulate, but unknown predictions are recorded as misses instead of rejected.
    void accumulate_allow_unknown(const LabelMap& gt, const LabelMap& pred, const ClassTable& table);

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    int n_ = 0;
    std::vector<std::uint64_t> counts_;
    std::vector<std::uint64_t> missed_;
};

ConfusionMatrix accumulate(ConfusionMatrix cm, const LabelMap& gt, const LabelMap& pred, const ClassTable& table);

/// IoU per score channel; std::nullopt where TP + FP + FN == 0.
std::vector<std::optional<double>> iou(const ConfusionMatrix& cm);
/// Mean of present IoUs. Throws DataError if every class is absent.
double miou(const ConfusionMatrix& cm);
/// Per-class recall; std::nullopt for classes without ground-truth pixels.
std::vector<std::optional<double>> class_accuracy(const ConfusionMatrix& cm);
/// Mean of present recalls. Throws DataError if every row is empty.
double class_avg_accuracy(const ConfusionMatrix& cm);

struct ClassScore {
    ClassId id = 0;
    std::optional<double> value;
};

struct MetricsReport {
    std::vector<ClassScore> per_class_iou;
    double miou = 0.0;
    std::vector<ClassScore> per_class_accuracy;
    double class_avg_accuracy = 0.0;
    std::optional<double> relative_runtime;
};

MetricsReport make_report(const ConfusionMatrix& cm, const ClassTable& table);

struct DensityReport {
    double spatial_density = 0.0;  // fraction in [0, 1]
    double temporal_density = 0.0; // Hz
};

/// Fraction of pixels that are not unknown. Throws UsageError on an empty list.
double spatial_density(std::span<const LabelMap> labels, const ClassTable& table);
/// (annotated frames - 1) / span of annotated timestamps; 0 with fewer than 2 annotated frames.
double temporal_density(const VideoSequence& seq);
/// Spatial density over every annotated frame; temporal density averaged over sequences.
DensityReport density_report(std::span<const VideoSequence> sequences, const ClassTable& table);

/// CSV: one row per class (id, name, iou, accuracy) plus a summary row. Absent values are empty fields.
void write_metrics_csv(std::ostream& os, const MetricsReport& report, const ClassTable& table);
void write_density_csv(std::ostream& os, const DensityReport& report);

/// Fixed six-decimal formatting used by every CSV writer.
std::string format_value(double v);

} // namespace primeseg
