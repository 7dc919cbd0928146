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

#include "primeseg/subn.hpp"

#include <algorithm>
#include <thread>

#include "primeseg/resample.hpp"

namespace primeseg {

LabelMap subn_round_trip(const LabelMap& labels, int stride) {
    return nn_upscale(nn_subsample(labels, stride), labels.height(), labels.width());
}

std::vector<SubNReport> run_subn(std::span<const LabelMap> dataset, std::span<const int> strides,
                                 const ClassTable& table, int threads) {
    if (dataset.empty())
        throw UsageError("sub-N evaluation needs at least one label map");
    for (int s : strides)
        if (s < 1)
            throw UsageError("sub-N stride must be >= 1, got " + std::to_string(s));
    const int workers = std::clamp(threads, 1, static_cast<int>(dataset.size()));

    std::vector<SubNReport> out;
    for (int stride : strides) {
        std::vector<ConfusionMatrix> partial(workers, ConfusionMatrix(table.num_scored()));
        auto work = [&](int w) {
            for (std::size_t i = w; i < dataset.size(); i += workers)
                partial[w].accumulate_allow_unknown(dataset[i], subn_round_trip(dataset[i], stride), table);
        };
        if (workers == 1) {
            work(0);
        } else {
            std::vector<std::jthread> pool;
            for (int w = 0; w < workers; ++w)
                pool.emplace_back(work, w);
        }
        ConfusionMatrix total(table.num_scored());
        for (const auto& p : partial)
            total += p;
        out.push_back({stride, total, make_report(total, table)});
    }
    return out;
}

void write_subn_csv(std::ostream& os, std::span<const SubNReport> reports, const ClassTable& table) {
    os << "method";
    for (int c = 0; c < table.num_scored(); ++c)
        os << ',' << table.info(table.id_of_channel(c)).name;
    os << ",mIoU\n";
    for (const auto& r : reports) {
        os << "sub-" << r.stride;
        for (const auto& s : r.metrics.per_class_iou)
            os << ',' << (s.value ? format_value(*s.value) : std::string());
        os << ',' << format_value(r.metrics.miou) << '\n';
    }
}

} // namespace primeseg
