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

#include "primeseg/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "primeseg/resample.hpp"

namespace primeseg::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// ---------------------------------------------------------------------------
// Specs

LayerSpec LayerSpec::conv(int in, int out, int kernel, int dilation) {
    LayerSpec s;
    s.kind = LayerKind::Conv;
    s.in_channels = in;
    s.out_channels = out;
    s.kernel = kernel;
    s.dilation = dilation;
    return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::downsample2() {
    LayerSpec s;
    s.kind = LayerKind::Downsample2;
    return s;
}

LayerSpec LayerSpec::bilinear_up(int factor) {
    LayerSpec s;
    s.kind = LayerKind::BilinearUp;
    s.factor = factor;
    return s;
}

LayerSpec LayerSpec::concat_input(int channels) {
    LayerSpec s;
    s.kind = LayerKind::ConcatInput;
    s.extra_channels = channels;
    return s;
}

namespace {

const char* kind_name(LayerKind k) {
    switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::Downsample2: return "down2";
    case LayerKind::BilinearUp: return "up";
    case LayerKind::ConcatInput: return "concat";
    }
    return "?";
}

} // namespace

void NetSpec::validate() const {
    if (input_channels < 1)
        throw UsageError("net '" + name + "' needs at least one input channel");
    if (layers.empty())
        throw UsageError("net '" + name + "' has no layers");
    int c = input_channels;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::string where = "net '" + name + "' layer " + std::to_string(i) + ": ";
        switch (l.kind) {
        case LayerKind::Conv:
            if (l.in_channels != c)
                throw UsageError(where + "conv expects " + std::to_string(l.in_channels) + " channels but receives " +
                                 std::to_string(c));
            if (l.out_channels < 1)
                throw UsageError(where + "conv needs at least one output channel");
            if (l.kernel != 1 && l.kernel != 3)
                throw UsageError(where + "kernel must be 1 or 3");
            if (l.dilation < 1)
                throw UsageError(where + "dilation must be >= 1");
            c = l.out_channels;
            break;
        case LayerKind::BilinearUp:
            if (l.factor < 1)
                throw UsageError(where + "upsampling factor must be >= 1");
            break;
        case LayerKind::ConcatInput:
            if (l.extra_channels < 1)
                throw UsageError(where + "concat needs at least one channel");
            c += l.extra_channels;
            break;
        case LayerKind::Relu:
        case LayerKind::Downsample2:
            break;
        }
    }
}

int NetSpec::output_channels() const {
    int c = input_channels;
    for (const auto& l : layers) {
        if (l.kind == LayerKind::Conv)
            c = l.out_channels;
        else if (l.kind == LayerKind::ConcatInput)
            c += l.extra_channels;
    }
    return c;
}

int NetSpec::num_convs() const {
    return static_cast<int>(std::count_if(layers.begin(), layers.end(),
                                          [](const LayerSpec& l) { return l.kind == LayerKind::Conv; }));
}

int NetSpec::num_side_inputs() const {
    return static_cast<int>(std::count_if(layers.begin(), layers.end(),
                                          [](const LayerSpec& l) { return l.kind == LayerKind::ConcatInput; }));
}

std::pair<int, int> NetSpec::output_dims(int h, int w) const {
    for (const auto& l : layers) {
        if (l.kind == LayerKind::Downsample2) {
            h = ceil_div(h, 2);
            w = ceil_div(w, 2);
        } else if (l.kind == LayerKind::BilinearUp) {
            h *= l.factor;
            w *= l.factor;
        }
    }
    return {h, w};
}

std::uint64_t NetSpec::multiply_adds(int h, int w) const {
    std::uint64_t total = 0;
    for (const auto& l : layers) {
        const std::uint64_t px = static_cast<std::uint64_t>(h) * w;
        if (l.kind == LayerKind::Conv) {
            total += px * l.out_channels * l.in_channels * l.kernel * l.kernel;
        } else if (l.kind == LayerKind::Downsample2) {
            h = ceil_div(h, 2);
            w = ceil_div(w, 2);
        } else if (l.kind == LayerKind::BilinearUp) {
            h *= l.factor;
            w *= l.factor;
        }
    }
    return total;
}

std::string NetSpec::canonical() const {
    std::ostringstream os;
    os << "in=" << input_channels;
    for (const auto& l : layers) {
        os << ';' << kind_name(l.kind);
        if (l.kind == LayerKind::Conv)
            os << '(' << l.in_channels << ',' << l.out_channels << ",k" << l.kernel << ",d" << l.dilation << ')';
        else if (l.kind == LayerKind::BilinearUp)
            os << '(' << l.factor << ')';
        else if (l.kind == LayerKind::ConcatInput)
            os << '(' << l.extra_channels << ')';
    }
    return os.str();
}

std::uint64_t NetSpec::hash() const {
    // FNV-1a, 64-bit
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

NetSpec default_priming_spec(int num_classes) {
    using L = LayerSpec;
    NetSpec s{"priming",
              3,
              {L::conv(3, 16), L::relu(), L::conv(16, 16), L::relu(), L::downsample2(),
               L::conv(16, 32), L::relu(), L::conv(32, 32, 3, 2), L::relu(), L::conv(32, 32, 3, 2), L::relu(),
               L::conv(32, 32), L::relu(), L::conv(32, 16), L::relu(), L::conv(16, num_classes, 1),
               L::bilinear_up(2)}};
    s.validate();
    return s;
}

NetSpec default_approximating_spec(int num_classes) {
    using L = LayerSpec;
    NetSpec s{"approximating",
              3,
              {L::conv(3, 8), L::relu(), L::conv(8, 16), L::relu(), L::conv(16, 16), L::relu(),
               L::conv(16, num_classes, 1)}};
    s.validate();
    return s;
}

NetSpec default_ensemble_spec(int num_classes) {
    using L = LayerSpec;
    NetSpec s{"ensemble",
              num_classes,
              {L::concat_input(num_classes), L::conv(2 * num_classes, 16), L::relu(), L::conv(16, num_classes, 1)}};
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Params

NetParams NetParams::zeros_like(const NetSpec& spec) {
    spec.validate();
    NetParams p;
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::Conv)
            continue;
        ConvWeights cw;
        cw.out_channels = l.out_channels;
        cw.in_channels = l.in_channels;
        cw.kernel = l.kernel;
        cw.weights.assign(static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel, 0.0);
        cw.bias.assign(l.out_channels, 0.0);
        p.convs.push_back(std::move(cw));
    }
    return p;
}

bool NetParams::same_shape(const NetParams& other) const {
    if (convs.size() != other.convs.size())
        return false;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        const auto& a = convs[i];
        const auto& b = other.convs[i];
        if (a.out_channels != b.out_channels || a.in_channels != b.in_channels || a.kernel != b.kernel ||
            a.weights.size() != b.weights.size() || a.bias.size() != b.bias.size())
            return false;
    }
    return true;
}

bool NetParams::all_finite() const {
    auto finite = [](double v) { return std::isfinite(v); };
    return std::all_of(convs.begin(), convs.end(), [&](const ConvWeights& c) {
        return std::all_of(c.weights.begin(), c.weights.end(), finite) &&
               std::all_of(c.bias.begin(), c.bias.end(), finite);
    });
}

std::size_t NetParams::num_values() const {
    std::size_t n = 0;
    for (const auto& c : convs)
        n += c.weights.size() + c.bias.size();
    return n;
}

void NetParams::add_scaled(const NetParams& other, double s) {
    if (!same_shape(other))
        throw DataError("parameter shapes differ");
    for (std::size_t i = 0; i < convs.size(); ++i) {
        auto& a = convs[i];
        const auto& b = other.convs[i];
        for (std::size_t j = 0; j < a.weights.size(); ++j)
            a.weights[j] += s * b.weights[j];
        for (std::size_t j = 0; j < a.bias.size(); ++j)
            a.bias[j] += s * b.bias[j];
    }
}

void NetParams::scale(double s) {
    for (auto& c : convs) {
        for (double& v : c.weights)
            v *= s;
        for (double& v : c.bias)
            v *= s;
    }
}

double NetParams::squared_norm() const {
    double s = 0.0;
    for (const auto& c : convs) {
        for (double v : c.weights)
            s += v * v;
        for (double v : c.bias)
            s += v * v;
    }
    return s;
}

NetParams init_params(const NetSpec& spec, std::uint64_t seed) {
    NetParams p = NetParams::zeros_like(spec);
    std::mt19937_64 rng(seed);
    for (auto& c : p.convs) {
        const double fan_in = static_cast<double>(c.in_channels) * c.kernel * c.kernel;
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (double& v : c.weights)
            v = dist(rng);
    }
    return p;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0))
        throw UsageError("learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw UsageError("momentum must lie in [0, 1)");
    if (epochs < 1)
        throw UsageError("epochs must be >= 1");
    if (batch_size < 1)
        throw UsageError("batch size must be >= 1");
    if (clip_norm < 0.0)
        throw UsageError("clip norm must be non-negative");
}

void SgdMomentum::step(NetParams& params, const NetParams& grads, const TrainConfig& config) {
    if (!params.same_shape(grads) || !params.same_shape(velocity_))
        throw DataError("optimizer step: parameter, gradient and velocity shapes differ");
    double g_scale = 1.0;
    if (config.clip_norm > 0.0) {
        const double norm = std::sqrt(grads.squared_norm());
        if (norm > config.clip_norm)
            g_scale = config.clip_norm / norm;
    }
    velocity_.scale(config.momentum);
    velocity_.add_scaled(grads, g_scale);
    params.add_scaled(velocity_, -config.learning_rate);
}

// ---------------------------------------------------------------------------
// Layer kernels

namespace {

// Rows: (ci, ky, kx); columns: output pixels.
void im2col(const Tensor& x, int kernel, int dilation, std::vector<double>& col) {
    const int pad = dilation * (kernel / 2);
    const std::size_t hw = x.plane_size();
    col.assign(static_cast<std::size_t>(x.channels) * kernel * kernel * hw, 0.0);
    std::size_t row = 0;
    for (int c = 0; c < x.channels; ++c) {
        const double* src = x.values.data() + c * hw;
        for (int ky = 0; ky < kernel; ++ky) {
            const int dy = ky * dilation - pad;
            for (int kx = 0; kx < kernel; ++kx, ++row) {
                const int dx = kx * dilation - pad;
                double* dst = col.data() + row * hw;
                const int x0 = std::max(0, -dx);
                const int x1 = std::min(x.width, x.width - dx);
                for (int y = 0; y < x.height; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= x.height || x0 >= x1)
                        continue;
                    std::copy(src + static_cast<std::size_t>(sy) * x.width + x0 + dx,
                              src + static_cast<std::size_t>(sy) * x.width + x1 + dx,
                              dst + static_cast<std::size_t>(y) * x.width + x0);
                }
            }
        }
    }
}

void col2im_add(const std::vector<double>& col, int kernel, int dilation, Tensor& dx) {
    const int pad = dilation * (kernel / 2);
    const std::size_t hw = dx.plane_size();
    std::size_t row = 0;
    for (int c = 0; c < dx.channels; ++c) {
        double* dst = dx.values.data() + c * hw;
        for (int ky = 0; ky < kernel; ++ky) {
            const int oy = ky * dilation - pad;
            for (int kx = 0; kx < kernel; ++kx, ++row) {
                const int ox = kx * dilation - pad;
                const double* src = col.data() + row * hw;
                const int x0 = std::max(0, -ox);
                const int x1 = std::min(dx.width, dx.width - ox);
                for (int y = 0; y < dx.height; ++y) {
                    const int sy = y + oy;
                    if (sy < 0 || sy >= dx.height)
                        continue;
                    double* d = dst + static_cast<std::size_t>(sy) * dx.width + ox;
                    const double* s = src + static_cast<std::size_t>(y) * dx.width;
                    for (int xx = x0; xx < x1; ++xx)
                        d[xx] += s[xx];
                }
            }
        }
    }
}

Tensor conv_forward(const Tensor& x, const ConvWeights& w, int dilation) {
    const std::size_t hw = x.plane_size();
    Tensor y(w.out_channels, x.height, x.width);
    const int k2 = w.kernel * w.kernel;
    ConstMatrixMap wm(w.weights.data(), w.out_channels, static_cast<Eigen::Index>(w.in_channels) * k2);
    MatrixMap ym(y.values.data(), w.out_channels, static_cast<Eigen::Index>(hw));
    if (w.kernel == 1) {
        ConstMatrixMap xm(x.values.data(), x.channels, static_cast<Eigen::Index>(hw));
        ym.noalias() = wm * xm;
    } else {
        std::vector<double> col;
        im2col(x, w.kernel, dilation, col);
        ConstMatrixMap cm(col.data(), static_cast<Eigen::Index>(w.in_channels) * k2, static_cast<Eigen::Index>(hw));
        ym.noalias() = wm * cm;
    }
    for (int o = 0; o < w.out_channels; ++o)
        ym.row(o).array() += w.bias[o];
    return y;
}

Tensor conv_backward(const Tensor& x, const ConvWeights& w, int dilation, const Tensor& gy, ConvWeights& gw) {
    const std::size_t hw = x.plane_size();
    const int k2 = w.kernel * w.kernel;
    const Eigen::Index rows = static_cast<Eigen::Index>(w.in_channels) * k2;
    ConstMatrixMap wm(w.weights.data(), w.out_channels, rows);
    ConstMatrixMap gym(gy.values.data(), w.out_channels, static_cast<Eigen::Index>(hw));
    MatrixMap gwm(gw.weights.data(), w.out_channels, rows);
    for (int o = 0; o < w.out_channels; ++o)
        gw.bias[o] += gym.row(o).sum();
    Tensor gx(x.channels, x.height, x.width);
    if (w.kernel == 1) {
        ConstMatrixMap xm(x.values.data(), x.channels, static_cast<Eigen::Index>(hw));
        gwm.noalias() += gym * xm.transpose();
        MatrixMap gxm(gx.values.data(), x.channels, static_cast<Eigen::Index>(hw));
        gxm.noalias() = wm.transpose() * gym;
    } else {
        std::vector<double> col;
        im2col(x, w.kernel, dilation, col);
        ConstMatrixMap cm(col.data(), rows, static_cast<Eigen::Index>(hw));
        gwm.noalias() += gym * cm.transpose();
        std::vector<double> gcol(col.size());
        MatrixMap gcm(gcol.data(), rows, static_cast<Eigen::Index>(hw));
        gcm.noalias() = wm.transpose() * gym;
        col2im_add(gcol, w.kernel, dilation, gx);
    }
    return gx;
}

Tensor downsample2_forward(const Tensor& x) {
    const int h = ceil_div(x.height, 2);
    const int w = ceil_div(x.width, 2);
    Tensor y(x.channels, h, w);
    for (int c = 0; c < x.channels; ++c)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) {
                double s = 0.0;
                int n = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int sy = 2 * yy + dy, sx = 2 * xx + dx;
                        if (sy < x.height && sx < x.width) {
                            s += x.at(c, sy, sx);
                            ++n;
                        }
                    }
                y.at(c, yy, xx) = s / n;
            }
    return y;
}

Tensor downsample2_backward(const Tensor& x, const Tensor& gy) {
    Tensor gx(x.channels, x.height, x.width);
    for (int c = 0; c < x.channels; ++c)
        for (int yy = 0; yy < gy.height; ++yy)
            for (int xx = 0; xx < gy.width; ++xx) {
                const int h_n = std::min(2, x.height - 2 * yy);
                const int w_n = std::min(2, x.width - 2 * xx);
                const double g = gy.at(c, yy, xx) / (h_n * w_n);
                for (int dy = 0; dy < h_n; ++dy)
                    for (int dx = 0; dx < w_n; ++dx)
                        gx.at(c, 2 * yy + dy, 2 * xx + dx) += g;
            }
    return gx;
}

void check_params(const NetSpec& spec, const NetParams& params) {
    spec.validate();
    if (static_cast<int>(params.convs.size()) != spec.num_convs())
        throw DataError("net '" + spec.name + "' has " + std::to_string(spec.num_convs()) + " conv layers but params hold " +
                        std::to_string(params.convs.size()));
    std::size_t ci = 0;
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::Conv)
            continue;
        const auto& w = params.convs[ci++];
        if (w.in_channels != l.in_channels || w.out_channels != l.out_channels || w.kernel != l.kernel ||
            w.weights.size() != static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel ||
            w.bias.size() != static_cast<std::size_t>(l.out_channels))
            throw DataError("net '" + spec.name + "': params do not match conv layer " + std::to_string(ci - 1));
    }
}

} // namespace

Tensor forward(const NetSpec& spec, const NetParams& params, const Tensor& input, std::span<const Tensor> side_inputs,
               ForwardCache* cache) {
    check_params(spec, params);
    if (input.channels != spec.input_channels)
        throw DataError("net '" + spec.name + "' expects " + std::to_string(spec.input_channels) +
                        " input channels, got " + std::to_string(input.channels));
    if (static_cast<int>(side_inputs.size()) != spec.num_side_inputs())
        throw DataError("net '" + spec.name + "' expects " + std::to_string(spec.num_side_inputs()) +
                        " side inputs, got " + std::to_string(side_inputs.size()));
    if (input.height < 1 || input.width < 1)
        throw DataError("net '" + spec.name + "' received an empty input");
    if (cache) {
        cache->layer_inputs.clear();
        cache->side_input_channels.clear();
    }

    Tensor x = input;
    std::size_t conv_i = 0, side_i = 0;
    for (const auto& l : spec.layers) {
        if (cache)
            cache->layer_inputs.push_back(x);
        switch (l.kind) {
        case LayerKind::Conv:
            x = conv_forward(x, params.convs[conv_i++], l.dilation);
            break;
        case LayerKind::Relu:
            for (double& v : x.values)
                v = v > 0.0 ? v : 0.0;
            break;
        case LayerKind::Downsample2:
            x = downsample2_forward(x);
            break;
        case LayerKind::BilinearUp:
            x = resize_bilinear(x, x.height * l.factor, x.width * l.factor);
            break;
        case LayerKind::ConcatInput: {
            const Tensor& side = side_inputs[side_i++];
            if (side.channels != l.extra_channels)
                throw DataError("net '" + spec.name + "': side input has " + std::to_string(side.channels) +
                                " channels, expected " + std::to_string(l.extra_channels));
            x = concat_channels(x, side);
            if (cache)
                cache->side_input_channels.push_back(side.channels);
            break;
        }
        }
    }
    if (!x.all_finite())
        throw NumericError("net '" + spec.name + "' produced non-finite values");
    return x;
}

Gradients backward(const NetSpec& spec, const NetParams& params, const ForwardCache& cache, const Tensor& output_grad) {
    check_params(spec, params);
    if (cache.layer_inputs.size() != spec.layers.size())
        throw UsageError("backward on net '" + spec.name + "' needs the cache of a forward pass");

    Gradients g;
    g.params = NetParams::zeros_like(spec);
    g.side_inputs.resize(spec.num_side_inputs());
    Tensor gy = output_grad;
    int conv_i = spec.num_convs();
    int side_i = spec.num_side_inputs();
    for (int li = static_cast<int>(spec.layers.size()) - 1; li >= 0; --li) {
        const auto& l = spec.layers[li];
        const Tensor& x = cache.layer_inputs[li];
        switch (l.kind) {
        case LayerKind::Conv: {
            --conv_i;
            gy = conv_backward(x, params.convs[conv_i], l.dilation, gy, g.params.convs[conv_i]);
            break;
        }
        case LayerKind::Relu:
            for (std::size_t i = 0; i < gy.values.size(); ++i)
                if (!(x.values[i] > 0.0))
                    gy.values[i] = 0.0;
            break;
        case LayerKind::Downsample2:
            gy = downsample2_backward(x, gy);
            break;
        case LayerKind::BilinearUp:
            gy = resize_bilinear_adjoint(gy, x.height, x.width);
            break;
        case LayerKind::ConcatInput: {
            --side_i;
            const std::size_t head = x.size();
            Tensor side(l.extra_channels, x.height, x.width);
            std::copy(gy.values.begin() + static_cast<std::ptrdiff_t>(head), gy.values.end(), side.values.begin());
            g.side_inputs[side_i] = std::move(side);
            Tensor main(x.channels, x.height, x.width);
            std::copy(gy.values.begin(), gy.values.begin() + static_cast<std::ptrdiff_t>(head), main.values.begin());
            gy = std::move(main);
            break;
        }
        }
    }
    g.input = std::move(gy);
    return g;
}

Tensor softmax_channels(const Tensor& scores) {
    Tensor p(scores.channels, scores.height, scores.width);
    const std::size_t n = scores.plane_size();
    const int C = scores.channels;
    for (std::size_t i = 0; i < n; ++i) {
        double m = scores.values[i];
        for (int c = 1; c < C; ++c)
            m = std::max(m, scores.values[c * n + i]);
        double z = 0.0;
        for (int c = 0; c < C; ++c)
            z += p.values[c * n + i] = std::exp(scores.values[c * n + i] - m);
        for (int c = 0; c < C; ++c)
            p.values[c * n + i] /= z;
    }
    return p;
}

Tensor softmax_channels_backward(const Tensor& probs, const Tensor& grad) {
    if (!probs.same_shape(grad))
        throw DataError("softmax backward: shape mismatch");
    Tensor g(probs.channels, probs.height, probs.width);
    const std::size_t n = probs.plane_size();
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (int c = 0; c < probs.channels; ++c)
            dot += probs.values[c * n + i] * grad.values[c * n + i];
        for (int c = 0; c < probs.channels; ++c)
            g.values[c * n + i] = probs.values[c * n + i] * (grad.values[c * n + i] - dot);
    }
    return g;
}

LossResult masked_cross_entropy(const Tensor& scores, const LabelMap& gt, const ClassTable& table) {
    if (scores.height != gt.height() || scores.width != gt.width())
        throw DataError("loss: scores are " + std::to_string(scores.height) + "x" + std::to_string(scores.width) +
                        " but labels are " + std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
    if (scores.channels != table.num_scored())
        throw DataError("loss: score channels do not match class table");
    LossResult r;
    r.grad = Tensor(scores.channels, scores.height, scores.width);
    const std::size_t n = scores.plane_size();
    const int C = scores.channels;
    std::vector<double> p(C);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const ClassId id = gt.ids()[i];
        if (!table.contains(id))
            throw DataError("loss: label id " + std::to_string(id) + " is not in the class table");
        if (table.is_unknown(id))
            continue;
        const int target = table.channel_of(id);
        double m = scores.values[i];
        for (int c = 1; c < C; ++c)
            m = std::max(m, scores.values[c * n + i]);
        double z = 0.0;
        for (int c = 0; c < C; ++c) {
            p[c] = std::exp(scores.values[c * n + i] - m);
            z += p[c];
        }
        total += std::log(z) + m - scores.values[target * n + i];
        for (int c = 0; c < C; ++c)
            r.grad.values[c * n + i] = p[c] / z;
        r.grad.values[target * n + i] -= 1.0;
        ++r.counted_pixels;
    }
    if (r.counted_pixels == 0)
        return r;
    const double inv = 1.0 / static_cast<double>(r.counted_pixels);
    r.loss = total * inv;
    for (double& v : r.grad.values)
        v *= inv;
    if (!std::isfinite(r.loss))
        throw NumericError("loss is not finite");
    return r;
}

} // namespace primeseg::nn
