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
#include <span>
#include <string>
#include <vector>

#include "primeseg/core.hpp"

namespace primeseg::nn {

enum class LayerKind { Conv, Relu, Downsample2, BilinearUp, ConcatInput };

/// One layer of a fully-convolutional stack.
///
/// Conv layers use zero padding of dilation * (kernel / 2), so spatial size is kept.
/// Downsample2 is a 2x2 average pool with ceil sizing (partial windows average the
/// pixels they cover). ConcatInput appends the next side input along channels.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    int dilation = 1;
    int factor = 2;          // BilinearUp
    int extra_channels = 0;  // ConcatInput

    static LayerSpec conv(int in, int out, int kernel = 3, int dilation = 1);
    static LayerSpec relu();
    static LayerSpec downsample2();
    static LayerSpec bilinear_up(int factor);
    static LayerSpec concat_input(int channels);

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetSpec {
    std::string name;
    int input_channels = 3;
    std::vector<LayerSpec> layers;

    /// Throws UsageError if channel counts do not chain or a conv is malformed.
    void validate() const;
    int output_channels() const;
    int num_convs() const;
    int num_side_inputs() const;
    /// Output spatial dims for an input of h x w.
    std::pair<int, int> output_dims(int h, int w) const;
    /// Multiply-accumulate count of one forward pass at h x w.
    std::uint64_t multiply_adds(int h, int w) const;
    /// Stable textual form; the checkpoint hash is computed over it.
    std::string canonical() const;
    std::uint64_t hash() const;

    friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

/// Deep stand-in for the keyframe network: dilated convs and one stride-2 stage.
NetSpec default_priming_spec(int num_classes);
/// Shallow net applied to the externally downsampled frame.
NetSpec default_approximating_spec(int num_classes);
/// Thin fusion net: previous full-size scores concatenated with upsampled current scores.
NetSpec default_ensemble_spec(int num_classes);

struct ConvWeights {
    int out_channels = 0;
    int in_channels = 0;
    int kernel = 1;
    std::vector<double> weights; // [out][in][ky][kx]
    std::vector<double> bias;    // [out]

    double& w(int o, int i, int ky, int kx) {
        return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
    }
    double w(int o, int i, int ky, int kx) const {
        return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
    }
    friend bool operator==(const ConvWeights&, const ConvWeights&) = default;
};

/// Weights and biases for every conv layer of a NetSpec, in layer order.
struct NetParams {
    std::vector<ConvWeights> convs;

    static NetParams zeros_like(const NetSpec& spec);
    bool same_shape(const NetParams& other) const;
    bool all_finite() const;
    std::size_t num_values() const;
    /// this += scale * other
    void add_scaled(const NetParams& other, double scale);
    void scale(double s);
    double squared_norm() const;

    friend bool operator==(const NetParams&, const NetParams&) = default;
};

/// Fan-in scaled normal weights (variance 2 / fan_in), zero biases.
NetParams init_params(const NetSpec& spec, std::uint64_t seed);

/// Activations recorded by forward() for backward().
struct ForwardCache {
    std::vector<Tensor> layer_inputs;
    std::vector<int> side_input_channels;
    bool empty() const { return layer_inputs.empty(); }
};

/// Runs the stack. Side inputs are consumed in order by ConcatInput layers.
/// Throws DataError on shape mismatch and NumericError on non-finite output.
Tensor forward(const NetSpec& spec, const NetParams& params, const Tensor& input,
               std::span<const Tensor> side_inputs = {}, ForwardCache* cache = nullptr);

struct Gradients {
    NetParams params;
    Tensor input;
    std::vector<Tensor> side_inputs;
};

/// Exact gradients of the forward composition. Throws UsageError without a cache.
Gradients backward(const NetSpec& spec, const NetParams& params, const ForwardCache& cache,
                   const Tensor& output_grad);

struct LossResult {
    double loss = 0.0;
    Tensor grad;
    std::size_t counted_pixels = 0;
};

/// Softmax cross-entropy averaged over pixels whose ground truth is not unknown.
LossResult masked_cross_entropy(const Tensor& scores, const LabelMap& gt, const ClassTable& table);

/// Per-pixel softmax over channels.
Tensor softmax_channels(const Tensor& scores);
/// Gradient w.r.t. the softmax input given its output `probs` and the gradient at the output.
Tensor softmax_channels_backward(const Tensor& probs, const Tensor& grad);

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    int epochs = 1;
    int batch_size = 1;
    std::uint64_t seed = 0;
    /// Rescales the batch gradient to this L2 norm when exceeded; 0 disables.
    double clip_norm = 0.0;

    void validate() const;
};

/// Heavy-ball momentum: v = momentum * v + g; p -= lr * v.
class SgdMomentum {
public:
    explicit SgdMomentum(const NetSpec& spec) : velocity_(NetParams::zeros_like(spec)) {}
    explicit SgdMomentum(NetParams velocity) : velocity_(std::move(velocity)) {}

    void step(NetParams& params, const NetParams& grads, const TrainConfig& config);
    const NetParams& velocity() const { return velocity_; }

private:
    NetParams velocity_;
};

void save_checkpoint(const std::filesystem::path& path, const NetSpec& spec, const NetParams& params);
/// Throws DataError if the file is malformed or was written for a different spec.
NetParams load_checkpoint(const std::filesystem::path& path, const NetSpec& spec);

} // namespace primeseg::nn
