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

#include "primeseg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "primeseg/metrics.hpp"
#include "primeseg/resample.hpp"

namespace primeseg {

void ScheduleConfig::validate() const {
    if (priming_period && *priming_period < 1)
        throw UsageError("priming period must be >= 1, got " + std::to_string(*priming_period));
    if (downsample_factor < 1)
        throw UsageError("downsample factor must be >= 1, got " + std::to_string(downsample_factor));
}

std::string period_label(const std::optional<int>& period) { return period ? std::to_string(*period) : "inf"; }

std::optional<int> parse_period(const std::string& text) {
    if (text == "inf" || text == "none")
        return std::nullopt;
    std::size_t used = 0;
    int k = 0;
    try {
        k = std::stoi(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || k < 1)
        throw UsageError("priming period must be a positive integer or 'inf', got '" + text + "'");
    return k;
}

void CostModel::validate() const {
    if (!(cost_prime > 0.0) || !(cost_approx > 0.0) || !(cost_ensemble > 0.0) || !std::isfinite(cost_prime) ||
        !std::isfinite(cost_approx) || !std::isfinite(cost_ensemble))
        throw UsageError("cost model entries must be positive and finite");
}

void PipelineNets::validate(const ClassTable& table) const {
    const int c = table.num_scored();
    for (const Network* n : {&priming, &approximating, &ensemble}) {
        n->spec.validate();
        if (n->spec.output_channels() != c)
            throw DataError("net '" + n->spec.name + "' emits " + std::to_string(n->spec.output_channels()) +
                            " channels but the class table has " + std::to_string(c) + " classes");
    }
    if (priming.spec.input_channels != 3 || approximating.spec.input_channels != 3)
        throw DataError("priming and approximating nets must take RGB input");
    if (priming.spec.num_side_inputs() != 0 || approximating.spec.num_side_inputs() != 0)
        throw DataError("priming and approximating nets take no side inputs");
    if (ensemble.spec.input_channels != c || ensemble.spec.num_side_inputs() != 1)
        throw DataError("ensemble net must take previous scores plus one concatenated score input");
}

namespace {

Tensor to_size(Tensor t, int h, int w) {
    if (t.height == h && t.width == w)
        return t;
    return resize_bilinear(t, h, w);
}

} // namespace

ScoreMap run_priming(const Network& priming, const Image& frame) {
    Tensor out = nn::forward(priming.spec, priming.params, frame.tensor());
    return ScoreMap(to_size(std::move(out), frame.height(), frame.width()));
}

ScoreMap run_approximating(const Network& approximating, const Image& frame, int downsample_factor) {
    const Image small = downsample_image(frame, downsample_factor);
    Tensor out = nn::forward(approximating.spec, approximating.params, small.tensor());
    return ScoreMap(resize_bilinear(out, frame.height(), frame.width()));
}

ScoreMap run_ensemble(const Network& ensemble, const ScoreMap& previous, const ScoreMap& upsampled) {
    const Tensor side[] = {upsampled.tensor()};
    Tensor out = nn::forward(ensemble.spec, ensemble.params, nn::softmax_channels(previous.tensor()), side);
    return ScoreMap(to_size(std::move(out), previous.height(), previous.width()));
}

RecurrentSegmenter::RecurrentSegmenter(const PipelineNets& nets, ScheduleConfig schedule, const ClassTable& table)
    : nets_(nets), schedule_(schedule) {
    schedule_.validate();
    nets_.validate(table);
}

RecurrentSegmenter::Step RecurrentSegmenter::step(const Image& frame) {
    if (previous_ && (previous_->height() != frame.height() || previous_->width() != frame.width()))
        throw DataError("frame " + std::to_string(frame_index_) + " changes resolution mid-sequence");
    Step s;
    s.primed = schedule_.is_primed(frame_index_) || !previous_;
    if (s.primed) {
        s.scores = run_priming(nets_.priming, frame);
    } else {
        const ScoreMap up = run_approximating(nets_.approximating, frame, schedule_.downsample_factor);
        s.scores = run_ensemble(nets_.ensemble, *previous_, up);
    }
    previous_ = s.scores;
    ++frame_index_;
    return s;
}

void RecurrentSegmenter::reset() {
    frame_index_ = 0;
    previous_.reset();
}

nn::NetParams passthrough_ensemble_params(const nn::NetSpec& spec, std::uint64_t seed) {
    using nn::LayerKind;
    spec.validate();
    const auto& L = spec.layers;
    const int C = spec.input_channels;
    if (L.size() != 4 || L[0].kind != LayerKind::ConcatInput || L[0].extra_channels != C ||
        L[1].kind != LayerKind::Conv || L[1].kernel != 3 || L[1].out_channels < 2 * C ||
        L[2].kind != LayerKind::Relu || L[3].kind != LayerKind::Conv || L[3].kernel != 1 ||
        L[3].out_channels != C)
        throw UsageError("pass-through init needs concat, 3x3 conv (>= 2C units), relu, 1x1 conv");
    nn::NetParams p = nn::init_params(spec, seed);
    auto& first = p.convs[0];
    auto& last = p.convs[1];
    // Hidden unit c carries relu(u_c), unit C + c carries relu(-u_c); u is the side input.
    for (int o = 0; o < 2 * C; ++o)
        for (int i = 0; i < 2 * C; ++i)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx)
                    first.w(o, i, ky, kx) = 0.0;
    for (int c = 0; c < C; ++c) {
        first.w(c, C + c, 1, 1) = 1.0;
        first.w(C + c, C + c, 1, 1) = -1.0;
    }
    std::fill(last.weights.begin(), last.weights.end(), 0.0);
    for (int c = 0; c < C; ++c) {
        last.w(c, c, 0, 0) = 1.0;
        last.w(c, C + c, 0, 0) = -1.0;
    }
    return p;
}

SequenceResult segment_sequence(const VideoSequence& seq, const PipelineNets& nets, const ScheduleConfig& schedule,
                                const ClassTable& table, const CostModel& costs) {
    if (seq.frames.empty())
        throw UsageError("cannot segment an empty sequence");
    costs.validate();
    RecurrentSegmenter seg(nets, schedule, table);
    SequenceResult r;
    for (const auto& f : seq.frames) {
        auto step = seg.step(f.image);
        r.labels.push_back(argmax_labels(step.scores, table));
        r.cost_trace.push_back(step.primed ? costs.cost_prime : costs.recurrent_cost());
        r.primed.push_back(step.primed);
        r.scores.push_back(std::move(step.scores));
    }
    return r;
}

std::vector<LabelMap> segment_approximating_only(const VideoSequence& seq, const Network& approximating,
                                                 int downsample_factor, const ClassTable& table) {
    std::vector<LabelMap> out;
    out.reserve(seq.frames.size());
    for (const auto& f : seq.frames)
        out.push_back(argmax_labels(run_approximating(approximating, f.image, downsample_factor), table));
    return out;
}

double amortized_relative_runtime(const ScheduleConfig& schedule, const CostModel& costs, int length) {
    if (length < 1)
        throw UsageError("sequence length must be >= 1, got " + std::to_string(length));
    schedule.validate();
    costs.validate();
    const double cp = costs.cost_prime;
    const double r = costs.recurrent_cost();
    const auto& k = schedule.priming_period;
    // Whole cycles: one cycle has the same ratio.
    if (k && length % *k == 0)
        return (cp + (*k - 1) * r) / (*k * cp);
    const long long primed = k ? (length + *k - 1) / *k : 1;
    return (static_cast<double>(primed) * cp + static_cast<double>(length - primed) * r) / (length * cp);
}

std::vector<BudgetPoint> budget_curve(const CostModel& costs, std::span<const std::optional<int>> periods, int length) {
    std::vector<BudgetPoint> out;
    for (const auto& k : periods) {
        ScheduleConfig s;
        s.priming_period = k;
        out.push_back({k, amortized_relative_runtime(s, costs, length)});
    }
    return out;
}

void write_budget_csv(std::ostream& os, std::span<const BudgetPoint> curve, const CostModel& costs) {
    os << "# cost model: " << costs.provenance << " (prime=" << costs.cost_prime << ", approx=" << costs.cost_approx
       << ", ensemble=" << costs.cost_ensemble << ")\n";
    os << "priming_period,relative_runtime\n";
    for (const auto& p : curve)
        os << period_label(p.period) << ',' << format_value(p.relative_runtime) << '\n';
}

void write_cost_trace_csv(std::ostream& os, std::span<const std::string> sequence_names,
                          std::span<const SequenceResult> results) {
    os << "sequence,frame,primed,cost\n";
    for (std::size_t s = 0; s < results.size(); ++s)
        for (std::size_t t = 0; t < results[s].cost_trace.size(); ++t) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.9g", results[s].cost_trace[t]);
            os << sequence_names[s] << ',' << t << ',' << (results[s].primed[t] ? 1 : 0) << ',' << buf << '\n';
        }
}

namespace {

template <typename Fn>
double median_seconds(int repeats, Fn&& fn) {
    std::vector<double> times;
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    const std::size_t n = times.size();
    return n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
}

} // namespace

CostModel calibrate_cost_model(const PipelineNets& nets, int height, int width, int downsample_factor, int repeats) {
    if (repeats < 1)
        throw UsageError("calibration needs at least one repeat");
    Tensor pixels(3, height, width);
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : pixels.values)
        v = u(rng);
    const Image frame(std::move(pixels));
    const ScoreMap prev = run_priming(nets.priming, frame);
    const ScoreMap up = run_approximating(nets.approximating, frame, downsample_factor);

    CostModel c;
    c.cost_prime = median_seconds(repeats, [&] { (void)run_priming(nets.priming, frame); });
    c.cost_approx =
        median_seconds(repeats, [&] { (void)run_approximating(nets.approximating, frame, downsample_factor); });
    c.cost_ensemble = median_seconds(repeats, [&] { (void)run_ensemble(nets.ensemble, prev, up); });
    c.provenance = "measured: median of " + std::to_string(repeats) + " timed runs at " + std::to_string(height) + "x" +
                   std::to_string(width) + ", factor " + std::to_string(downsample_factor);
    return c;
}

CostModel analytic_cost_model(const PipelineNets& nets, int height, int width, int downsample_factor) {
    CostModel c;
    const int sh = ceil_div(height, downsample_factor);
    const int sw = ceil_div(width, downsample_factor);
    c.cost_prime = static_cast<double>(nets.priming.spec.multiply_adds(height, width));
    c.cost_approx = static_cast<double>(nets.approximating.spec.multiply_adds(sh, sw));
    c.cost_ensemble = static_cast<double>(nets.ensemble.spec.multiply_adds(height, width));
    c.provenance = "analytic: conv multiply-adds at " + std::to_string(height) + "x" + std::to_string(width) +
                   ", factor " + std::to_string(downsample_factor);
    return c;
}

} // namespace primeseg
