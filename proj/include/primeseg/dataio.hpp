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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "primeseg/core.hpp"

namespace primeseg {

namespace fs = std::filesystem;

// On-disk layout:
//   root/classes.cfg                 class table (JSON)
//   root/manifest.cfg                sequences, frame files, timestamps, split (JSON)
//   root/seq_%03d/frame_%04d.img     8-bit RGB PNG
//   root/seq_%03d/label_%04d.img     8-bit single-channel PNG of class ids
//
// A directory holding classes.cfg, images/ and labels/ without a manifest is read
// as CamVid-style data: images/<seq>_<frame number>.png with color-coded
// labels/<seq>_<frame number>_L.png present only for annotated frames.

/// Named lists of sequence names, e.g. "train" and "test".
using Split = std::map<std::string, std::vector<std::string>>;

struct Dataset {
    ClassTable table;
    std::vector<VideoSequence> sequences;
    Split split;

    /// Sequences listed under `split_name`; every sequence when the name is "all".
    std::vector<VideoSequence> select(const std::string& split_name) const;
};

struct LoadOptions {
    /// Map label colors missing from the class table to unknown instead of failing.
    bool lenient_colors = false;
    /// Frame rate assigned to CamVid-style frame numbers.
    double camvid_frame_rate = 30.0;
};

ClassTable read_class_table(const fs::path& path);
void write_class_table(const fs::path& path, const ClassTable& table);

/// Accepts a manifest file or a dataset directory. Throws DataError on missing files,
/// mismatched dimensions, invalid split lists or unmapped label colors in strict mode.
Dataset load_dataset(const fs::path& path, const LoadOptions& options = {});

/// Writes the full layout under `root` and returns the manifest path.
fs::path save_dataset(std::span<const VideoSequence> sequences, const ClassTable& table, const fs::path& root,
                      const Split& split = {});

/// Splits sequences into "train" and "test" so that their class-pixel histograms are close in L1.
/// Starts from a seeded assignment and applies best-improvement swaps until none helps.
Split split_by_distribution(std::span<const VideoSequence> sequences, const ClassTable& table,
                            double train_fraction, std::uint64_t seed);

/// Normalized class histograms of the two named groups, L1 distance between them.
double split_histogram_distance(std::span<const VideoSequence> sequences, const ClassTable& table,
                                const Split& split);

/// Image codec helpers (PNG bytes under the .img extension).
void write_image(const fs::path& path, const Image& image);
Image read_image(const fs::path& path);
void write_label_ids(const fs::path& path, const LabelMap& labels);
LabelMap read_label_ids(const fs::path& path);
LabelMap read_label_colors(const fs::path& path, const ClassTable& table, bool lenient);

/// Prediction tree: root/seq_%03d/label_%04d.img, indexed like the dataset.
fs::path prediction_path(const fs::path& root, std::size_t sequence_index, std::size_t frame_index);

} // namespace primeseg
