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

#include "primeseg/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace primeseg {

void SceneConfig::validate() const {
    if (width < 8 || height < 8)
        throw UsageError("scene must be at least 8x8 pixels");
    if (num_frames < 2)
        throw UsageError("scene needs at least 2 frames");
    if (!(frame_rate > 0.0))
        throw UsageError("frame rate must be positive");
    if (!(horizon > 0.0 && horizon < 1.0))
        throw UsageError("horizon must lie strictly between 0 and 1");
    const int bonnet = effective_bonnet_rows();
    const int hz = static_cast<int>(std::lround(horizon * height));
    if (bonnet < 0 || height - bonnet <= hz + 1)
        throw UsageError("unknown margin leaves no room for the road");
    if (num_cars < 0 || num_trucks < 0)
        throw UsageError("mover counts must be non-negative");
    if (!(max_speed >= 0.0 && max_speed <= 3.0))
        throw UsageError("mover speed must lie in [0, 3] pixels per frame");
    if (!(lane_drift >= 0.0 && lane_drift <= 3.0))
        throw UsageError("lane drift must lie in [0, 3] pixels per frame");
    if (!(noise_sigma >= 0.0) || !(brightness_drift >= 0.0))
        throw UsageError("noise and brightness drift must be non-negative");
}

namespace {

struct Mover {
    ClassId id = 0;
    double x = 0, y = 0;   // top-left at frame 0
    double vx = 0, vy = 0; // pixels per frame
    int w = 1, h = 1;
};

struct Rgbf {
    double r, g, b;
};

Rgbf render_color(ClassId id, const SceneRoles& roles) {
    if (id == roles.road) return {0.40, 0.40, 0.42};
    if (id == roles.lane) return {0.92, 0.92, 0.88};
    if (id == roles.sky) return {0.55, 0.72, 0.95};
    if (id == roles.fence) return {0.50, 0.38, 0.30};
    if (id == roles.car) return {0.80, 0.15, 0.12};
    if (id == roles.truck) return {0.20, 0.35, 0.75};
    return {0.08, 0.08, 0.08};
}

class SceneLayout {
public:
    SceneLayout(const SceneConfig& c) : c_(c) {
        horizon_row_ = static_cast<int>(std::lround(c.horizon * c.height));
        road_end_ = c.height - c.effective_bonnet_rows();
    }

    int horizon_row() const { return horizon_row_; }
    int road_end() const { return road_end_; }

    double depth(int y) const { return (y - horizon_row_ + 0.5) / (road_end_ - horizon_row_); }
    double half_width(int y) const { return (0.04 + 0.58 * depth(y)) * c_.width; }

    LabelMap labels(int t, double drift_dir, const std::vector<Mover>& movers) const {
        const auto& r = c_.roles;
        LabelMap m(c_.height, c_.width, r.sky);
        const double cx = 0.5 * c_.width + drift_dir * c_.lane_drift * t;
        for (int y = horizon_row_; y < road_end_; ++y) {
            const double hw = half_width(y);
            for (int x = 0; x < c_.width; ++x)
                m.at(y, x) = std::abs(x + 0.5 - cx) <= hw ? r.road : r.fence;
            const int lw = depth(y) > 0.5 ? 2 : 1;
            for (double u : {-1.0 / 3.0, 1.0 / 3.0}) {
                const double xl = cx + u * hw;
                const int x0 = static_cast<int>(std::floor(xl - 0.5 * lw + 0.5));
                for (int x = std::max(0, x0); x < std::min(c_.width, x0 + lw); ++x)
                    m.at(y, x) = r.lane;
            }
        }
        for (const auto& mv : movers) {
            const int x0 = static_cast<int>(std::lround(mv.x + mv.vx * t));
            const int y0 = static_cast<int>(std::lround(mv.y + mv.vy * t));
            for (int y = std::max(0, y0); y < std::min(road_end_, y0 + mv.h); ++y)
                for (int x = std::max(0, x0); x < std::min(c_.width, x0 + mv.w); ++x)
                    m.at(y, x) = mv.id;
        }
        for (int y = road_end_; y < c_.height; ++y)
            for (int x = 0; x < c_.width; ++x)
                m.at(y, x) = r.unknown;
        return m;
    }

private:
    const SceneConfig& c_;
    int horizon_row_ = 0;
    int road_end_ = 0;
};

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

} // namespace

VideoSequence generate(const SceneConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const SceneLayout layout(config);
    const int W = config.width, H = config.height;

    const double drift_dir = u01(rng) < 0.5 ? -1.0 : 1.0;
    const double bright_dir = u01(rng) < 0.5 ? -1.0 : 1.0;

    std::vector<Mover> movers;
    auto add_movers = [&](ClassId id, int count, int w, int h) {
        for (int i = 0; i < count; ++i) {
            Mover m;
            m.id = id;
            m.w = w;
            m.h = h;
            const int span = layout.road_end() - layout.horizon_row();
            const double y_lo = layout.horizon_row() + 0.25 * span;
            const double y_hi = std::max(y_lo, static_cast<double>(layout.road_end() - h - 1));
            m.y = y_lo + (y_hi - y_lo) * u01(rng);
            const int base = std::min(layout.road_end() - 1, static_cast<int>(m.y) + h);
            m.x = 0.5 * W + (u01(rng) - 0.5) * 1.2 * layout.half_width(base) - 0.5 * w;
            const double speed = config.max_speed * (0.3 + 0.7 * u01(rng));
            const double angle = 2.0 * std::numbers::pi * u01(rng);
            m.vx = speed * std::cos(angle);
            m.vy = 0.5 * speed * std::sin(angle);
            movers.push_back(m);
        }
    };
    add_movers(config.roles.truck, config.num_trucks, std::max(4, W / 7), std::max(3, H / 9));
    add_movers(config.roles.car, config.num_cars, std::max(3, W / 12), std::max(2, H / 15));

    VideoSequence seq;
    seq.frame_rate = config.frame_rate;
    char name[32];
    std::snprintf(name, sizeof name, "synthetic_%llu", static_cast<unsigned long long>(config.seed));
    seq.name = name;
    for (int t = 0; t < config.num_frames; ++t) {
        Frame f;
        f.timestamp = t / config.frame_rate;
        LabelMap labels = layout.labels(t, drift_dir, movers);
        const double gain = 1.0 + bright_dir * config.brightness_drift * t;
        Tensor px(3, H, W);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const Rgbf c = render_color(labels.at(y, x), config.roles);
                const std::array<double, 3> rgb = {c.r, c.g, c.b};
                for (int ch = 0; ch < 3; ++ch)
                    px.at(ch, y, x) = quantize(rgb[ch] * gain + config.noise_sigma * noise(rng));
            }
        f.image = Image(std::move(px));
        f.label = std::move(labels);
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

std::vector<VideoSequence> generate_dataset(const SceneConfig& config, int count) {
    if (count < 0)
        throw UsageError("sequence count must be non-negative");
    std::vector<VideoSequence> out;
    std::seed_seq base{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32)};
    std::vector<std::uint32_t> seeds(2 * static_cast<std::size_t>(count));
    base.generate(seeds.begin(), seeds.end());
    for (int i = 0; i < count; ++i) {
        SceneConfig c = config;
        c.seed = (static_cast<std::uint64_t>(seeds[2 * i]) << 32) | seeds[2 * i + 1];
        VideoSequence s = generate(c);
        char name[32];
        std::snprintf(name, sizeof name, "seq_%03d", i);
        s.name = name;
        out.push_back(std::move(s));
    }
    return out;
}

double label_agreement(const VideoSequence& seq, int lag) {
    const int n = static_cast<int>(seq.frames.size());
    if (lag < 0 || lag >= n)
        throw UsageError("lag must lie in [0, frame count)");
    double sum = 0.0;
    for (int t = 0; t + lag < n; ++t) {
        const auto& a = seq.frames[t].label;
        const auto& b = seq.frames[t + lag].label;
        if (!a || !b)
            throw DataError("label agreement needs every frame labeled");
        std::size_t same = 0;
        for (std::size_t i = 0; i < a->size(); ++i)
            same += a->ids()[i] == b->ids()[i];
        sum += static_cast<double>(same) / static_cast<double>(a->size());
    }
    return sum / (n - lag);
}

} // namespace primeseg
