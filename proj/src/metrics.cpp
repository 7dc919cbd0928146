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

#include "primeseg/metrics.hpp"

#include <cstdio>

namespace primeseg {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : n_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0), missed_(num_classes, 0) {
    if (num_classes < 1)
        throw UsageError("confusion matrix needs at least one class");
}

std::uint64_t ConfusionMatrix::row_sum(int gt) const {
    std::uint64_t s = missed_[gt];
    for (int p = 0; p < n_; ++p)
        s += at(gt, p);
    return s;
}

std::uint64_t ConfusionMatrix::column_sum(int pred) const {
    std::uint64_t s = 0;
    for (int g = 0; g < n_; ++g)
        s += at(g, pred);
    return s;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto c : counts_)
        s += c;
    for (auto c : missed_)
        s += c;
    return s;
}

namespace {

void check_pair(const ConfusionMatrix& cm, const LabelMap& gt, const LabelMap& pred, const ClassTable& table) {
    if (gt.height() != pred.height() || gt.width() != pred.width())
        throw DataError("gt is " + std::to_string(gt.height()) + "x" + std::to_string(gt.width()) + " but pred is " +
                        std::to_string(pred.height()) + "x" + std::to_string(pred.width()));
    if (cm.num_classes() != table.num_scored())
        throw DataError("confusion matrix class count does not match class table");
}

} // namespace

void ConfusionMatrix::accumulate(const LabelMap& gt, const LabelMap& pred, const ClassTable& table) {
    check_pair(*this, gt, pred, table);
    for (ClassId id : pred.ids()) {
        if (!table.contains(id))
            throw DataError("prediction id " + std::to_string(id) + " is not in the class table");
        if (table.is_unknown(id))
            throw DataError("prediction contains the unknown class id " + std::to_string(id));
    }
    check_labels(gt, table);
    const auto& g = gt.ids();
    const auto& p = pred.ids();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (table.is_unknown(g[i]))
            continue;
        ++at(table.channel_of(g[i]), table.channel_of(p[i]));
    }
}

void ConfusionMatrix::accumulate_allow_unknown(const LabelMap& gt, const LabelMap& pred, const ClassTable& table) {
    check_pair(*this, gt, pred, table);
    check_labels(gt, table);
    check_labels(pred, table);
    const auto& g = gt.ids();
    const auto& p = pred.ids();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (table.is_unknown(g[i]))
            continue;
        const int row = table.channel_of(g[i]);
        if (table.is_unknown(p[i]))
            ++missed(row);
        else
            ++at(row, table.channel_of(p[i]));
    }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.n_ != n_)
        throw DataError("cannot merge confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts_.size(); ++i)
        counts_[i] += other.counts_[i];
    for (std::size_t i = 0; i < missed_.size(); ++i)
        missed_[i] += other.missed_[i];
    return *this;
}

ConfusionMatrix accumulate(ConfusionMatrix cm, const LabelMap& gt, const LabelMap& pred, const ClassTable& table) {
    cm.accumulate(gt, pred, table);
    return cm;
}

std::vector<std::optional<double>> iou(const ConfusionMatrix& cm) {
    std::vector<std::optional<double>> out(cm.num_classes());
    for (int c = 0; c < cm.num_classes(); ++c) {
        const std::uint64_t tp = cm.at(c, c);
        const std::uint64_t fp = cm.column_sum(c) - tp;
        const std::uint64_t fn = cm.row_sum(c) - tp;
        const std::uint64_t denom = tp + fp + fn;
        if (denom > 0)
            out[c] = static_cast<double>(tp) / static_cast<double>(denom);
    }
    return out;
}

namespace {

double mean_present(const std::vector<std::optional<double>>& values, const char* what) {
    double sum = 0.0;
    int n = 0;
    for (const auto& v : values) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0)
        throw DataError(std::string("no class has a defined ") + what);
    return sum / n;
}

} // namespace

double miou(const ConfusionMatrix& cm) { return mean_present(iou(cm), "IoU"); }

std::vector<std::optional<double>> class_accuracy(const ConfusionMatrix& cm) {
    std::vector<std::optional<double>> out(cm.num_classes());
    for (int c = 0; c < cm.num_classes(); ++c) {
        const std::uint64_t row = cm.row_sum(c);
        if (row > 0)
            out[c] = static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
    }
    return out;
}

double class_avg_accuracy(const ConfusionMatrix& cm) { return mean_present(class_accuracy(cm), "accuracy"); }

MetricsReport make_report(const ConfusionMatrix& cm, const ClassTable& table) {
    if (cm.num_classes() != table.num_scored())
        throw DataError("confusion matrix class count does not match class table");
    MetricsReport r;
    const auto ious = iou(cm);
    const auto accs = class_accuracy(cm);
    for (int c = 0; c < cm.num_classes(); ++c) {
        const ClassId id = table.id_of_channel(c);
        r.per_class_iou.push_back({id, ious[c]});
        r.per_class_accuracy.push_back({id, accs[c]});
    }
    r.miou = miou(cm);
    r.class_avg_accuracy = class_avg_accuracy(cm);
    return r;
}

double spatial_density(std::span<const LabelMap> labels, const ClassTable& table) {
    if (labels.empty())
        throw UsageError("spatial density needs at least one label map");
    std::uint64_t known = 0, total = 0;
    for (const auto& m : labels) {
        for (ClassId id : m.ids())
            if (!table.is_unknown(id))
                ++known;
        total += m.size();
    }
    return static_cast<double>(known) / static_cast<double>(total);
}

double temporal_density(const VideoSequence& seq) {
    if (seq.frames.size() < 2)
        throw UsageError("temporal density needs at least 2 frames");
    std::vector<double> stamps;
    for (const auto& f : seq.frames)
        if (f.label)
            stamps.push_back(f.timestamp);
    if (stamps.size() < 2)
        return 0.0;
    const double span = stamps.back() - stamps.front();
    if (!(span > 0.0))
        throw DataError("annotated frames of '" + seq.name + "' span no time");
    return static_cast<double>(stamps.size() - 1) / span;
}

DensityReport density_report(std::span<const VideoSequence> sequences, const ClassTable& table) {
    std::vector<LabelMap> labels;
    double temporal_sum = 0.0;
    int temporal_n = 0;
    for (const auto& s : sequences) {
        for (const auto& f : s.frames)
            if (f.label)
                labels.push_back(*f.label);
        if (s.frames.size() >= 2) {
            temporal_sum += temporal_density(s);
            ++temporal_n;
        }
    }
    if (labels.empty())
        throw DataError("dataset has no annotated frames");
    DensityReport r;
    r.spatial_density = spatial_density(labels, table);
    r.temporal_density = temporal_n > 0 ? temporal_sum / temporal_n : 0.0;
    return r;
}

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

namespace {

std::string opt_field(const std::optional<double>& v) { return v ? format_value(*v) : std::string(); }

} // namespace

void write_metrics_csv(std::ostream& os, const MetricsReport& report, const ClassTable& table) {
    os << "class_id,class_name,iou,accuracy,relative_runtime\n";
    for (std::size_t i = 0; i < report.per_class_iou.size(); ++i) {
        const ClassId id = report.per_class_iou[i].id;
        os << static_cast<int>(id) << ',' << table.info(id).name << ',' << opt_field(report.per_class_iou[i].value)
           << ',' << opt_field(report.per_class_accuracy[i].value) << ",\n";
    }
    os << "summary,mean," << format_value(report.miou) << ',' << format_value(report.class_avg_accuracy) << ','
       << opt_field(report.relative_runtime) << '\n';
}

void write_density_csv(std::ostream& os, const DensityReport& report) {
    os << "spatial_density,temporal_density_hz\n"
       << format_value(report.spatial_density) << ',' << format_value(report.temporal_density) << '\n';
}

} // namespace primeseg
