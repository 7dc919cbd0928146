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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "primeseg/error.hpp"

namespace primeseg {

using ClassId = std::uint8_t;

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct ClassInfo {
    ClassId id = 0;
    std::string name;
    Rgb color;
};

/// Ordered class list with one designated unknown class.
///
/// Score channels enumerate the non-unknown classes in increasing id order, so
/// channel order and id order agree and argmax ties resolve to the lowest id.
class ClassTable {
public:
    /// Throws UsageError unless ids are 0..n-1 in order, unknown_id is one of
    /// them, and at least two non-unknown classes remain.
    ClassTable(std::vector<ClassInfo> classes, ClassId unknown_id);

    const std::vector<ClassInfo>& classes() const { return classes_; }
    std::size_t size() const { return classes_.size(); }
    ClassId unknown_id() const { return unknown_id_; }
    bool contains(int id) const { return id >= 0 && id < static_cast<int>(classes_.size()); }
    bool is_unknown(ClassId id) const { return id == unknown_id_; }

    /// Number of evaluated (non-unknown) classes; the score channel count.
    int num_scored() const { return static_cast<int>(classes_.size()) - 1; }
    int channel_of(ClassId id) const;
    ClassId id_of_channel(int channel) const;
    const ClassInfo& info(ClassId id) const { return classes_.at(id); }
    std::optional<ClassId> find_color(Rgb color) const;
    std::optional<ClassId> find_name(const std::string& name) const;

    /// Road, lane, sky, fence, car, truck plus unknown; used by the synthetic generator.
    static ClassTable highway();

    friend bool operator==(const ClassTable& a, const ClassTable& b);

private:
    std::vector<ClassInfo> classes_;
    ClassId unknown_id_ = 0;
};

/// Dense channel-major (C, H, W) array of doubles.
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values;

    Tensor() = default;
    Tensor(int c, int h, int w, double fill = 0.0);

    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return values.size(); }
    double& at(int c, int y, int x) { return values[(c * plane_size()) + static_cast<std::size_t>(y) * width + x]; }
    double at(int c, int y, int x) const { return values[(c * plane_size()) + static_cast<std::size_t>(y) * width + x]; }
    std::span<double> plane(int c) { return {values.data() + c * plane_size(), plane_size()}; }
    std::span<const double> plane(int c) const { return {values.data() + c * plane_size(), plane_size()}; }
    bool same_shape(const Tensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Channel concatenation of tensors sharing height and width.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// H x W grid of class ids, row-major.
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(int height, int width, ClassId fill = 0);
    LabelMap(int height, int width, std::vector<ClassId> ids);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return ids_.size(); }
    ClassId at(int y, int x) const { return ids_[static_cast<std::size_t>(y) * width_ + x]; }
    ClassId& at(int y, int x) { return ids_[static_cast<std::size_t>(y) * width_ + x]; }
    const std::vector<ClassId>& ids() const { return ids_; }
    std::vector<ClassId>& ids() { return ids_; }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<ClassId> ids_;
};

/// RGB image with values in [0, 1].
class Image {
public:
    Image() = default;
    /// Throws DataError unless the tensor has three channels and every value is in [0, 1].
    explicit Image(Tensor pixels);

    int height() const { return pixels_.height; }
    int width() const { return pixels_.width; }
    const Tensor& tensor() const { return pixels_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    Tensor pixels_;
};

/// Per-pixel scores over the non-unknown classes, one channel per class.
class ScoreMap {
public:
    ScoreMap() = default;
    /// Throws NumericError on non-finite values.
    explicit ScoreMap(Tensor scores);

    int height() const { return scores_.height; }
    int width() const { return scores_.width; }
    int num_classes() const { return scores_.channels; }
    const Tensor& tensor() const { return scores_; }

    friend bool operator==(const ScoreMap&, const ScoreMap&) = default;

private:
    Tensor scores_;
};

struct Frame {
    Image image;
    std::optional<LabelMap> label;
    double timestamp = 0.0;

    friend bool operator==(const Frame&, const Frame&) = default;
};

struct VideoSequence {
    std::string name;
    std::vector<Frame> frames;
    double frame_rate = 30.0;

    int height() const { return frames.empty() ? 0 : frames.front().image.height(); }
    int width() const { return frames.empty() ? 0 : frames.front().image.width(); }

    friend bool operator==(const VideoSequence&, const VideoSequence&) = default;
};

struct Violation {
    int frame = -1;  // -1 for sequence-level rules
    std::string rule;
    std::string detail;
};

/// Empty iff the sequence satisfies every structural invariant.
std::vector<Violation> validate_sequence(const VideoSequence& seq, const ClassTable& table);

/// Per-pixel argmax over class scores; ties go to the lowest class id.
LabelMap argmax_labels(const ScoreMap& scores, const ClassTable& table);

/// One-hot score map of a label map; unknown pixels get all-zero scores.
ScoreMap one_hot(const LabelMap& labels, const ClassTable& table);

/// Throws DataError if any id in the map is not in the table.
void check_labels(const LabelMap& labels, const ClassTable& table);

} // namespace primeseg
