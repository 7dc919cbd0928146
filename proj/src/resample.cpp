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

#include "primeseg/resample.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace primeseg {

LabelMap nn_subsample(const LabelMap& labels, int stride) {
    if (stride < 1)
        throw UsageError("subsample stride must be >= 1, got " + std::to_string(stride));
    const int h = ceil_div(labels.height(), stride);
    const int w = ceil_div(labels.width(), stride);
    LabelMap out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(y, x) = labels.at(y * stride, x * stride);
    return out;
}

LabelMap nn_upscale(const LabelMap& labels, int target_h, int target_w) {
    const int h = labels.height();
    const int w = labels.width();
    if (target_h < h || target_w < w)
        throw UsageError("upscale target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                         " is smaller than source " + std::to_string(h) + "x" + std::to_string(w));
    LabelMap out(target_h, target_w);
    std::vector<int> cols(target_w);
    for (int x = 0; x < target_w; ++x)
        cols[x] = static_cast<int>(static_cast<long long>(x) * w / target_w);
    for (int y = 0; y < target_h; ++y) {
        const int sy = static_cast<int>(static_cast<long long>(y) * h / target_h);
        for (int x = 0; x < target_w; ++x)
            out.at(y, x) = labels.at(sy, cols[x]);
    }
    return out;
}

namespace {

struct Tap {
    int lo = 0;
    int hi = 0;
    double frac = 0.0;
};

std::vector<Tap> axis_taps(int source, int target) {
    std::vector<Tap> taps(target);
    const double scale = static_cast<double>(source) / target;
    for (int t = 0; t < target; ++t) {
        double s = (t + kHalfPixel) * scale - kHalfPixel;
        s = std::clamp(s, 0.0, static_cast<double>(source - 1));
        const int lo = static_cast<int>(std::floor(s));
        taps[t].lo = lo;
        taps[t].hi = std::min(lo + 1, source - 1);
        taps[t].frac = s - lo;
    }
    return taps;
}

void check_target(int target_h, int target_w) {
    if (target_h < 1 || target_w < 1)
        throw UsageError("resize target must be at least 1x1, got " + std::to_string(target_h) + "x" +
                         std::to_string(target_w));
}

} // namespace

Tensor resize_bilinear(const Tensor& src, int target_h, int target_w) {
    check_target(target_h, target_w);
    if (src.height < 1 || src.width < 1)
        throw DataError("cannot resize an empty tensor");
    const auto ty = axis_taps(src.height, target_h);
    const auto tx = axis_taps(src.width, target_w);
    Tensor out(src.channels, target_h, target_w);
    for (int c = 0; c < src.channels; ++c) {
        const auto in = src.plane(c);
        auto dst = out.plane(c);
        for (int y = 0; y < target_h; ++y) {
            const double* r0 = in.data() + static_cast<std::size_t>(ty[y].lo) * src.width;
            const double* r1 = in.data() + static_cast<std::size_t>(ty[y].hi) * src.width;
            const double fy = ty[y].frac;
            double* d = dst.data() + static_cast<std::size_t>(y) * target_w;
            for (int x = 0; x < target_w; ++x) {
                const Tap& t = tx[x];
                const double top = r0[t.lo] + (r0[t.hi] - r0[t.lo]) * t.frac;
                const double bot = r1[t.lo] + (r1[t.hi] - r1[t.lo]) * t.frac;
                d[x] = top + (bot - top) * fy;
            }
        }
    }
    return out;
}

Tensor resize_bilinear_adjoint(const Tensor& grad, int source_h, int source_w) {
    check_target(source_h, source_w);
    const auto ty = axis_taps(source_h, grad.height);
    const auto tx = axis_taps(source_w, grad.width);
    Tensor out(grad.channels, source_h, source_w);
    for (int c = 0; c < grad.channels; ++c) {
        const auto g = grad.plane(c);
        auto dst = out.plane(c);
        for (int y = 0; y < grad.height; ++y) {
            double* r0 = dst.data() + static_cast<std::size_t>(ty[y].lo) * source_w;
            double* r1 = dst.data() + static_cast<std::size_t>(ty[y].hi) * source_w;
            const double fy = ty[y].frac;
            for (int x = 0; x < grad.width; ++x) {
                const Tap& t = tx[x];
                const double v = g[static_cast<std::size_t>(y) * grad.width + x];
                const double top = v * (1.0 - fy);
                const double bot = v * fy;
                r0[t.lo] += top * (1.0 - t.frac);
                r0[t.hi] += top * t.frac;
                r1[t.lo] += bot * (1.0 - t.frac);
                r1[t.hi] += bot * t.frac;
            }
        }
    }
    return out;
}

ScoreMap bilinear_resize(const ScoreMap& scores, int target_h, int target_w) {
    return ScoreMap(resize_bilinear(scores.tensor(), target_h, target_w));
}

Image downsample_image(const Image& image, int factor) {
    if (factor < 1)
        throw UsageError("downsample factor must be >= 1, got " + std::to_string(factor));
    Tensor t = resize_bilinear(image.tensor(), ceil_div(image.height(), factor), ceil_div(image.width(), factor));
    // Interpolation stays within the input range up to rounding.
    for (double& v : t.values)
        v = std::clamp(v, 0.0, 1.0);
    return Image(std::move(t));
}

} // namespace primeseg
