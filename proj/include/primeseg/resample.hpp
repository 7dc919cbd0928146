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

#include "primeseg/core.hpp"

namespace primeseg {

/// Pixel-center offset of the bilinear kernel: source = (target + kHalfPixel) * scale - kHalfPixel.
inline constexpr double kHalfPixel = 0.5;

/// Top-left anchored subsampling: out(i, j) = in(i * stride, j * stride), dims ceil(H / stride).
LabelMap nn_subsample(const LabelMap& labels, int stride);

/// out(i, j) = in(floor(i * h / target_h), floor(j * w / target_w)). Target must not be smaller.
LabelMap nn_upscale(const LabelMap& labels, int target_h, int target_w);

/// Half-pixel-center bilinear resize with edge clamping, applied per channel.
ScoreMap bilinear_resize(const ScoreMap& scores, int target_h, int target_w);

/// Bilinear shrink to ceil(H / factor) x ceil(W / factor).
Image downsample_image(const Image& image, int factor);

/// Tensor-level bilinear kernel shared by score maps, images and the network upsampling layer.
Tensor resize_bilinear(const Tensor& src, int target_h, int target_w);

/// Adjoint of resize_bilinear: maps a gradient on the resized tensor back to the source grid.
Tensor resize_bilinear_adjoint(const Tensor& grad, int source_h, int source_w);

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

} // namespace primeseg
