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

// Straightforward per-pixel convolution, independent of the im2col/GEMM path.

#include <vector>

namespace oracle {

// input [ci][y][x], weights [co][ci][ky][kx]; zero padding dilation * (k / 2).
inline std::vector<double> conv2d(const std::vector<double>& input, int ci, int h, int w,
                                  const std::vector<double>& weights, const std::vector<double>& bias, int co, int k,
                                  int dilation) {
    std::vector<double> out(static_cast<std::size_t>(co) * h * w, 0.0);
    const int pad = dilation * (k / 2);
    for (int o = 0; o < co; ++o)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = bias[o];
                for (int i = 0; i < ci; ++i)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int sy = y + ky * dilation - pad;
                            const int sx = x + kx * dilation - pad;
                            if (sy < 0 || sy >= h || sx < 0 || sx >= w)
                                continue;
                            acc += weights[((o * ci + i) * k + ky) * k + kx] * input[(i * h + sy) * w + sx];
                        }
                out[(o * h + y) * w + x] = acc;
            }
    return out;
}

inline std::vector<double> relu(std::vector<double> v) {
    for (double& x : v)
        x = x > 0.0 ? x : 0.0;
    return v;
}

} // namespace oracle
