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

#include <algorithm>
#include <deque>
#include <numeric>
#include <random>

#include "primeseg/pipeline.hpp"
#include "primeseg/resample.hpp"

namespace primeseg {

namespace {

struct FrameRef {
    std::size_t sequence = 0;
    std::size_t frame = 0;
};

std::vector<FrameRef> labeled_frames(std::span<const VideoSequence> train_set) {
    if (train_set.empty())
        throw UsageError("training set is empty");
    std::vector<FrameRef> refs;
    for (std::size_t s = 0; s < train_set.size(); ++s) {
        for (std::size_t f = 0; f < train_set[s].frames.size(); ++f) {
            if (!train_set[s].frames[f].label)
                throw DataError("training frame " + std::to_string(f) + " of '" + train_set[s].name +
                                "' has no label");
            refs.push_back({s, f});
        }
    }
    if (refs.empty())
        throw UsageError("training set has no frames");
    return refs;
}

// Shared loop for frame-independent training. `sample` returns the loss and adds its
// gradient into the accumulator.
template <typename SampleFn>
TrainResult train_frames(std::span<const VideoSequence> train_set, const nn::NetSpec& spec,
                         const nn::TrainConfig& config, const EpochCallback& on_epoch, SampleFn&& sample) {
    config.validate();
    auto refs = labeled_frames(train_set);
    TrainResult r;
    r.params = nn::init_params(spec, config.seed);
    nn::SgdMomentum opt(spec);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    nn::NetParams acc = nn::NetParams::zeros_like(spec);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(refs.begin(), refs.end(), rng);
        double loss_sum = 0.0;
        int in_batch = 0;
        for (std::size_t i = 0; i < refs.size(); ++i) {
            const Frame& f = train_set[refs[i].sequence].frames[refs[i].frame];
            loss_sum += sample(r.params, f, acc);
            if (++in_batch == config.batch_size || i + 1 == refs.size()) {
                acc.scale(1.0 / in_batch);
                opt.step(r.params, acc, config);
                acc.scale(0.0);
                in_batch = 0;
            }
        }
        if (!r.params.all_finite())
            throw NumericError("training of '" + spec.name + "' diverged in epoch " + std::to_string(epoch));
        r.epoch_loss.push_back(loss_sum / static_cast<double>(refs.size()));
        if (on_epoch)
            on_epoch(epoch, r.epoch_loss.back());
    }
    return r;
}

} // namespace

TrainResult train_priming(std::span<const VideoSequence> train_set, const nn::NetSpec& spec,
                          const nn::TrainConfig& config, const ClassTable& table, const EpochCallback& on_epoch) {
    spec.validate();
    if (spec.output_channels() != table.num_scored())
        throw DataError("priming net class count does not match the class table");
    return train_frames(train_set, spec, config, on_epoch,
                        [&](const nn::NetParams& params, const Frame& f, nn::NetParams& acc) {
                            nn::ForwardCache cache;
                            Tensor out = nn::forward(spec, params, f.image.tensor(), {}, &cache);
                            const int h = f.image.height(), w = f.image.width();
                            const bool resized = out.height != h || out.width != w;
                            const int oh = out.height, ow = out.width;
                            if (resized)
                                out = resize_bilinear(out, h, w);
                            auto loss = nn::masked_cross_entropy(out, *f.label, table);
                            if (resized)
                                loss.grad = resize_bilinear_adjoint(loss.grad, oh, ow);
                            acc.add_scaled(nn::backward(spec, params, cache, loss.grad).params, 1.0);
                            return loss.loss;
                        });
}

TrainResult train_approximating_only(std::span<const VideoSequence> train_set, const nn::NetSpec& spec,
                                     int downsample_factor, const nn::TrainConfig& config, const ClassTable& table,
                                     const EpochCallback& on_epoch) {
    spec.validate();
    if (spec.output_channels() != table.num_scored())
        throw DataError("approximating net class count does not match the class table");
    if (downsample_factor < 1)
        throw UsageError("downsample factor must be >= 1");
    return train_frames(train_set, spec, config, on_epoch,
                        [&](const nn::NetParams& params, const Frame& f, nn::NetParams& acc) {
                            const Image small = downsample_image(f.image, downsample_factor);
                            nn::ForwardCache cache;
                            const Tensor out = nn::forward(spec, params, small.tensor(), {}, &cache);
                            const Tensor up = resize_bilinear(out, f.image.height(), f.image.width());
                            auto loss = nn::masked_cross_entropy(up, *f.label, table);
                            const Tensor g = resize_bilinear_adjoint(loss.grad, out.height, out.width);
                            acc.add_scaled(nn::backward(spec, params, cache, g).params, 1.0);
                            return loss.loss;
                        });
}

namespace {

// One non-primed step kept for truncated backpropagation through time.
struct RecurrentStep {
    nn::ForwardCache approx_cache;
    nn::ForwardCache ensemble_cache;
    Tensor previous_probs;
    int approx_h = 0, approx_w = 0;
};

} // namespace

JointResult train_joint(std::span<const VideoSequence> train_set, const Network& priming, Network approximating,
                        Network ensemble, const ScheduleConfig& schedule, const nn::TrainConfig& config,
                        const ClassTable& table, const JointOptions& options, const EpochCallback& on_epoch) {
    config.validate();
    schedule.validate();
    if (options.unroll_length < 1)
        throw UsageError("unroll length must be >= 1");
    const PipelineNets nets{priming, approximating, ensemble};
    nets.validate(table);
    labeled_frames(train_set); // rejects empty sets and unlabeled frames

    const auto& aspec = approximating.spec;
    const auto& espec = ensemble.spec;
    nn::SgdMomentum approx_opt(aspec), ens_opt(espec);
    nn::NetParams approx_acc = nn::NetParams::zeros_like(aspec);
    nn::NetParams ens_acc = nn::NetParams::zeros_like(espec);
    std::mt19937_64 rng(config.seed ^ 0x5851f42d4c957f2dULL);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    JointResult r;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t loss_n = 0;
        int in_batch = 0;
        auto flush = [&] {
            if (in_batch == 0)
                return;
            approx_acc.scale(1.0 / in_batch);
            ens_acc.scale(1.0 / in_batch);
            approx_opt.step(approximating.params, approx_acc, config);
            ens_opt.step(ensemble.params, ens_acc, config);
            approx_acc.scale(0.0);
            ens_acc.scale(0.0);
            in_batch = 0;
        };

        for (std::size_t si : order) {
            const VideoSequence& seq = train_set[si];
            Tensor previous;
            std::deque<RecurrentStep> window;
            for (std::size_t t = 0; t < seq.frames.size(); ++t) {
                const Frame& f = seq.frames[t];
                const int h = f.image.height(), w = f.image.width();
                if (schedule.is_primed(static_cast<int>(t))) {
                    previous = run_priming(priming, f.image).tensor();
                    window.clear();
                    continue;
                }
                RecurrentStep step;
                const Image small = downsample_image(f.image, schedule.downsample_factor);
                const Tensor coarse =
                    nn::forward(aspec, approximating.params, small.tensor(), {}, &step.approx_cache);
                step.approx_h = coarse.height;
                step.approx_w = coarse.width;
                const Tensor side[] = {resize_bilinear(coarse, h, w)};
                step.previous_probs = nn::softmax_channels(previous);
                Tensor out = nn::forward(espec, ensemble.params, step.previous_probs, side, &step.ensemble_cache);
                if (out.height != h || out.width != w)
                    throw DataError("ensemble net must preserve frame resolution");
                auto loss = nn::masked_cross_entropy(out, *f.label, table);
                loss_sum += loss.loss;
                ++loss_n;

                window.push_back(std::move(step));
                while (static_cast<int>(window.size()) > options.unroll_length)
                    window.pop_front();

                // Walk back through the window: each ensemble step passes a gradient to its
                // approximating input and, further back, to the previous step's output.
                Tensor grad = std::move(loss.grad);
                for (auto it = window.rbegin(); it != window.rend(); ++it) {
                    auto g = nn::backward(espec, ensemble.params, it->ensemble_cache, grad);
                    ens_acc.add_scaled(g.params, 1.0);
                    const Tensor g_coarse = resize_bilinear_adjoint(g.side_inputs[0], it->approx_h, it->approx_w);
                    approx_acc.add_scaled(nn::backward(aspec, approximating.params, it->approx_cache, g_coarse).params,
                                          1.0);
                    grad = nn::softmax_channels_backward(it->previous_probs, g.input);
                }

                previous = std::move(out);
                if (++in_batch == config.batch_size)
                    flush();
            }
        }
        flush();
        if (!approximating.params.all_finite() || !ensemble.params.all_finite())
            throw NumericError("joint training diverged in epoch " + std::to_string(epoch));
        r.epoch_loss.push_back(loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0);
        if (on_epoch)
            on_epoch(epoch, r.epoch_loss.back());
    }
    r.approximating = std::move(approximating.params);
    r.ensemble = std::move(ensemble.params);
    return r;
}

JointResult train_joint(std::span<const VideoSequence> train_set, const Network& priming,
                        const nn::NetSpec& approximating_spec, const nn::NetSpec& ensemble_spec,
                        const ScheduleConfig& schedule, const nn::TrainConfig& config, const ClassTable& table,
                        const JointOptions& options, const EpochCallback& on_epoch) {
    Network approx{approximating_spec, nn::init_params(approximating_spec, config.seed + 1)};
    Network ens{ensemble_spec, options.passthrough_init ? passthrough_ensemble_params(ensemble_spec, config.seed + 2)
                                                        : nn::init_params(ensemble_spec, config.seed + 2)};
    return train_joint(train_set, priming, std::move(approx), std::move(ens), schedule, config, table, options,
                       on_epoch);
}

} // namespace primeseg
