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

// Checkpoint layout, all integers little-endian:
//   magic "PSEGCKPT" | u32 version | u64 spec hash | u32 tensor count
//   per tensor: u32 name length | name bytes | u64 element count | f64 values

#include <bit>
#include <cstring>
#include <fstream>

#include "primeseg/nn.hpp"

namespace primeseg::nn {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::string& what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
        throw DataError("checkpoint truncated while reading " + what);
    return v;
}

void put_tensor(std::ostream& os, const std::string& name, const std::vector<double>& values) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(os, values.size());
    os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
}

void get_tensor(std::istream& is, const std::string& expected_name, std::vector<double>& values) {
    const auto len = get<std::uint32_t>(is, "tensor name length");
    if (len > 4096)
        throw DataError("checkpoint tensor name is implausibly long");
    std::string name(len, '\0');
    if (!is.read(name.data(), len))
        throw DataError("checkpoint truncated while reading tensor name");
    if (name != expected_name)
        throw DataError("checkpoint holds tensor '" + name + "' where '" + expected_name + "' was expected");
    const auto count = get<std::uint64_t>(is, "tensor size");
    if (count != values.size())
        throw DataError("checkpoint tensor '" + name + "' has " + std::to_string(count) + " values, expected " +
                        std::to_string(values.size()));
    if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double))))
        throw DataError("checkpoint truncated inside tensor '" + name + "'");
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const NetSpec& spec, const NetParams& params) {
    NetParams shape = NetParams::zeros_like(spec);
    if (!shape.same_shape(params))
        throw DataError("cannot save parameters that do not match net '" + spec.name + "'");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw DataError("cannot open checkpoint for writing: " + path.string());
    os.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(os, kVersion);
    put<std::uint64_t>(os, spec.hash());
    put<std::uint32_t>(os, static_cast<std::uint32_t>(2 * params.convs.size()));
    for (std::size_t i = 0; i < params.convs.size(); ++i) {
        put_tensor(os, "conv" + std::to_string(i) + ".weight", params.convs[i].weights);
        put_tensor(os, "conv" + std::to_string(i) + ".bias", params.convs[i].bias);
    }
    if (!os)
        throw DataError("failed writing checkpoint " + path.string());
}

NetParams load_checkpoint(const std::filesystem::path& path, const NetSpec& spec) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw DataError("cannot open checkpoint: " + path.string());
    char magic[sizeof kMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw DataError(path.string() + " is not a primeseg checkpoint");
    const auto version = get<std::uint32_t>(is, "version");
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    const auto hash = get<std::uint64_t>(is, "spec hash");
    if (hash != spec.hash())
        throw DataError("checkpoint " + path.string() + " was written for a different '" + spec.name +
                        "' architecture (spec hash mismatch)");
    NetParams p = NetParams::zeros_like(spec);
    const auto count = get<std::uint32_t>(is, "tensor count");
    if (count != 2 * p.convs.size())
        throw DataError("checkpoint tensor count does not match the spec");
    for (std::size_t i = 0; i < p.convs.size(); ++i) {
        get_tensor(is, "conv" + std::to_string(i) + ".weight", p.convs[i].weights);
        get_tensor(is, "conv" + std::to_string(i) + ".bias", p.convs[i].bias);
    }
    if (!p.all_finite())
        throw NumericError("checkpoint " + path.string() + " holds non-finite parameters");
    return p;
}

} // namespace primeseg::nn
