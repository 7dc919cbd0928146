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

#include "primeseg/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace primeseg {

ClassTable::ClassTable(std::vector<ClassInfo> classes, ClassId unknown_id)
    : classes_(std::move(classes)), unknown_id_(unknown_id) {
    if (classes_.size() > 256)
        throw UsageError("class table holds at most 256 classes");
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (classes_[i].id != i)
            throw UsageError("class ids must be contiguous from 0 in order; entry " + std::to_string(i) +
                             " has id " + std::to_string(classes_[i].id));
    }
    if (unknown_id_ >= classes_.size())
        throw UsageError("unknown id " + std::to_string(unknown_id_) + " is not a class in the table");
    if (classes_.size() < 3)
        throw UsageError("class table needs at least 2 classes besides unknown");
}

int ClassTable::channel_of(ClassId id) const {
    if (id >= classes_.size() || id == unknown_id_)
        throw DataError("class id " + std::to_string(id) + " has no score channel");
    return id < unknown_id_ ? id : id - 1;
}

ClassId ClassTable::id_of_channel(int channel) const {
    if (channel < 0 || channel >= num_scored())
        throw DataError("score channel " + std::to_string(channel) + " out of range");
    return static_cast<ClassId>(channel < unknown_id_ ? channel : channel + 1);
}

std::optional<ClassId> ClassTable::find_color(Rgb color) const {
    for (const auto& c : classes_)
        if (c.color == color)
            return c.id;
    return std::nullopt;
}

std::optional<ClassId> ClassTable::find_name(const std::string& name) const {
    for (const auto& c : classes_)
        if (c.name == name)
            return c.id;
    return std::nullopt;
}

ClassTable ClassTable::highway() {
    return ClassTable({{0, "road", {128, 64, 128}},
                       {1, "lane", {255, 255, 255}},
                       {2, "sky", {70, 130, 180}},
                       {3, "fence", {190, 153, 153}},
                       {4, "car", {0, 0, 142}},
                       {5, "truck", {0, 60, 100}},
                       {6, "unknown", {0, 0, 0}}},
                      6);
}

bool operator==(const ClassTable& a, const ClassTable& b) {
    if (a.unknown_id_ != b.unknown_id_ || a.classes_.size() != b.classes_.size())
        return false;
    for (std::size_t i = 0; i < a.classes_.size(); ++i) {
        const auto& x = a.classes_[i];
        const auto& y = b.classes_[i];
        if (x.id != y.id || x.name != y.name || !(x.color == y.color))
            return false;
    }
    return true;
}

Tensor::Tensor(int c, int h, int w, double fill) : channels(c), height(h), width(w) {
    if (c < 0 || h < 0 || w < 0)
        throw UsageError("tensor dimensions must be non-negative");
    values.assign(static_cast<std::size_t>(c) * h * w, fill);
}

bool Tensor::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.height != b.height || a.width != b.width)
        throw DataError("channel concat needs equal spatial dims: " + std::to_string(a.height) + "x" +
                        std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                        std::to_string(b.width));
    Tensor out(a.channels + b.channels, a.height, a.width);
    std::copy(a.values.begin(), a.values.end(), out.values.begin());
    std::copy(b.values.begin(), b.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
}

LabelMap::LabelMap(int height, int width, ClassId fill) : height_(height), width_(width) {
    if (height < 1 || width < 1)
        throw UsageError("label map dimensions must be at least 1x1");
    ids_.assign(static_cast<std::size_t>(height) * width, fill);
}

LabelMap::LabelMap(int height, int width, std::vector<ClassId> ids)
    : height_(height), width_(width), ids_(std::move(ids)) {
    if (height < 1 || width < 1)
        throw UsageError("label map dimensions must be at least 1x1");
    if (ids_.size() != static_cast<std::size_t>(height) * width)
        throw DataError("label data size does not match " + std::to_string(height) + "x" + std::to_string(width));
}

Image::Image(Tensor pixels) : pixels_(std::move(pixels)) {
    if (pixels_.channels != 3)
        throw DataError("image must have 3 channels, got " + std::to_string(pixels_.channels));
    if (pixels_.height < 1 || pixels_.width < 1)
        throw DataError("image dimensions must be at least 1x1");
    for (double v : pixels_.values)
        if (!(v >= 0.0 && v <= 1.0))
            throw DataError("image values must lie in [0, 1]");
}

ScoreMap::ScoreMap(Tensor scores) : scores_(std::move(scores)) {
    if (!scores_.all_finite())
        throw NumericError("score map contains non-finite values");
}

void check_labels(const LabelMap& labels, const ClassTable& table) {
    for (ClassId id : labels.ids())
        if (!table.contains(id))
            throw DataError("label id " + std::to_string(id) + " is not in the class table");
}

std::vector<Violation> validate_sequence(const VideoSequence& seq, const ClassTable& table) {
    std::vector<Violation> out;
    if (!(seq.frame_rate > 0.0))
        out.push_back({-1, "frame_rate", "frame rate must be positive"});
    if (seq.frames.empty())
        return out;
    const int h = seq.frames.front().image.height();
    const int w = seq.frames.front().image.width();
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        const auto& f = seq.frames[i];
        const int idx = static_cast<int>(i);
        if (f.image.height() != h || f.image.width() != w)
            out.push_back({idx, "dimension", "image is " + std::to_string(f.image.height()) + "x" +
                                                 std::to_string(f.image.width()) + ", expected " +
                                                 std::to_string(h) + "x" + std::to_string(w)});
        if (i > 0 && !(f.timestamp > seq.frames[i - 1].timestamp))
            out.push_back({idx, "timestamp", "timestamps must be strictly increasing"});
        if (f.label) {
            if (f.label->height() != h || f.label->width() != w)
                out.push_back({idx, "dimension", "label is " + std::to_string(f.label->height()) + "x" +
                                                     std::to_string(f.label->width()) + ", expected " +
                                                     std::to_string(h) + "x" + std::to_string(w)});
            std::set<int> bad;
            for (ClassId id : f.label->ids())
                if (!table.contains(id))
                    bad.insert(id);
            for (int id : bad)
                out.push_back({idx, "label_id", "label id " + std::to_string(id) + " is not in the class table"});
        }
    }
    return out;
}

LabelMap argmax_labels(const ScoreMap& scores, const ClassTable& table) {
    const Tensor& t = scores.tensor();
    if (t.channels != table.num_scored())
        throw DataError("score map has " + std::to_string(t.channels) + " channels, class table expects " +
                        std::to_string(table.num_scored()));
    if (t.height < 1 || t.width < 1)
        throw DataError("score map is empty");
    LabelMap out(t.height, t.width);
    const std::size_t n = t.plane_size();
    for (std::size_t p = 0; p < n; ++p) {
        int best = 0;
        double best_v = t.values[p];
        for (int c = 1; c < t.channels; ++c) {
            const double v = t.values[c * n + p];
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        out.ids()[p] = table.id_of_channel(best);
    }
    return out;
}

ScoreMap one_hot(const LabelMap& labels, const ClassTable& table) {
    check_labels(labels, table);
    Tensor t(table.num_scored(), labels.height(), labels.width());
    const std::size_t n = t.plane_size();
    for (std::size_t p = 0; p < n; ++p) {
        const ClassId id = labels.ids()[p];
        if (!table.is_unknown(id))
            t.values[table.channel_of(id) * n + p] = 1.0;
    }
    return ScoreMap(std::move(t));
}

} // namespace primeseg
