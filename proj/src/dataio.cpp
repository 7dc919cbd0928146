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

#include "primeseg/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace primeseg {

using json = nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest.cfg";
constexpr const char* kClassesName = "classes.cfg";
constexpr int kManifestVersion = 1;

std::string seq_dir(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "seq_%03zu", i);
    return buf;
}

std::string indexed(const char* stem, std::size_t i) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s_%04zu.img", stem, i);
    return buf;
}

json read_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is)
        throw DataError("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw DataError("cannot parse " + path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os || !(os << text))
        throw DataError("cannot write " + path.string());
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw DataError("missing file: " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_png(const fs::path& path, const cv::Mat& mat) {
    std::vector<unsigned char> buf;
    if (!cv::imencode(".png", mat, buf))
        throw DataError("PNG encoding failed for " + path.string());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw DataError("cannot write " + path.string());
}

cv::Mat read_png(const fs::path& path) {
    const auto bytes = read_bytes(path);
    cv::Mat mat = cv::imdecode(bytes, cv::IMREAD_UNCHANGED);
    if (mat.empty())
        throw DataError("cannot decode image " + path.string());
    if (mat.depth() != CV_8U)
        throw DataError(path.string() + " must be an 8-bit image");
    return mat;
}

} // namespace

// ---------------------------------------------------------------------------
// Images

void write_image(const fs::path& path, const Image& image) {
    const Tensor& t = image.tensor();
    cv::Mat mat(t.height, t.width, CV_8UC3);
    for (int y = 0; y < t.height; ++y) {
        auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < t.width; ++x)
            for (int c = 0; c < 3; ++c) // OpenCV stores BGR
                row[x][2 - c] = static_cast<unsigned char>(std::lround(t.at(c, y, x) * 255.0));
    }
    write_png(path, mat);
}

Image read_image(const fs::path& path) {
    cv::Mat mat = read_png(path);
    if (mat.channels() != 3)
        throw DataError(path.string() + " must be a 3-channel image, has " + std::to_string(mat.channels()));
    Tensor t(3, mat.rows, mat.cols);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < mat.cols; ++x)
            for (int c = 0; c < 3; ++c)
                t.at(c, y, x) = row[x][2 - c] / 255.0;
    }
    return Image(std::move(t));
}

void write_label_ids(const fs::path& path, const LabelMap& labels) {
    cv::Mat mat(labels.height(), labels.width(), CV_8UC1);
    for (int y = 0; y < labels.height(); ++y)
        for (int x = 0; x < labels.width(); ++x)
            mat.at<unsigned char>(y, x) = labels.at(y, x);
    write_png(path, mat);
}

LabelMap read_label_ids(const fs::path& path) {
    cv::Mat mat = read_png(path);
    if (mat.channels() != 1)
        throw DataError(path.string() + " must be a single-channel id image");
    LabelMap m(mat.rows, mat.cols);
    for (int y = 0; y < mat.rows; ++y)
        for (int x = 0; x < mat.cols; ++x)
            m.at(y, x) = mat.at<unsigned char>(y, x);
    return m;
}

LabelMap read_label_colors(const fs::path& path, const ClassTable& table, bool lenient) {
    cv::Mat mat = read_png(path);
    if (mat.channels() != 3)
        throw DataError(path.string() + " must be a 3-channel color label image");
    LabelMap m(mat.rows, mat.cols);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < mat.cols; ++x) {
            const Rgb c{row[x][2], row[x][1], row[x][0]};
            const auto id = table.find_color(c);
            if (!id && !lenient)
                throw DataError(path.string() + ": color (" + std::to_string(c.r) + "," + std::to_string(c.g) + "," +
                                std::to_string(c.b) + ") at pixel (x=" + std::to_string(x) + ", y=" +
                                std::to_string(y) + ") is not in the class table");
            m.at(y, x) = id ? *id : table.unknown_id();
        }
    }
    return m;
}

fs::path prediction_path(const fs::path& root, std::size_t sequence_index, std::size_t frame_index) {
    return root / seq_dir(sequence_index) / indexed("label", frame_index);
}

// ---------------------------------------------------------------------------
// Class table

ClassTable read_class_table(const fs::path& path) {
    const json j = read_json(path);
    try {
        std::vector<ClassInfo> classes;
        std::optional<ClassId> unknown;
        for (const auto& c : j.at("classes")) {
            const int id = c.at("id").get<int>();
            if (id < 0 || id > 255)
                throw DataError("class id " + std::to_string(id) + " out of range");
            const auto rgb = c.at("color").get<std::vector<int>>();
            if (rgb.size() != 3 || std::any_of(rgb.begin(), rgb.end(), [](int v) { return v < 0 || v > 255; }))
                throw DataError("class '" + c.at("name").get<std::string>() + "' needs an RGB color in 0..255");
            classes.push_back({static_cast<ClassId>(id), c.at("name").get<std::string>(),
                               {static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                                static_cast<std::uint8_t>(rgb[2])}});
            if (c.value("unknown", false)) {
                if (unknown)
                    throw DataError("class table marks more than one class as unknown");
                unknown = static_cast<ClassId>(id);
            }
        }
        if (!unknown)
            throw DataError("class table marks no class as unknown");
        std::sort(classes.begin(), classes.end(), [](const ClassInfo& a, const ClassInfo& b) { return a.id < b.id; });
        return ClassTable(std::move(classes), *unknown);
    } catch (const json::exception& e) {
        throw DataError("malformed class table " + path.string() + ": " + e.what());
    } catch (const UsageError& e) {
        throw DataError("invalid class table " + path.string() + ": " + e.what());
    }
}

void write_class_table(const fs::path& path, const ClassTable& table) {
    json j;
    j["classes"] = json::array();
    for (const auto& c : table.classes()) {
        j["classes"].push_back({{"id", c.id},
                                {"name", c.name},
                                {"color", {c.color.r, c.color.g, c.color.b}},
                                {"unknown", table.is_unknown(c.id)}});
    }
    write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Datasets

std::vector<VideoSequence> Dataset::select(const std::string& split_name) const {
    if (split_name == "all")
        return sequences;
    const auto it = split.find(split_name);
    if (it == split.end())
        throw UsageError("dataset has no split named '" + split_name + "'");
    std::vector<VideoSequence> out;
    for (const auto& name : it->second) {
        const auto s = std::find_if(sequences.begin(), sequences.end(),
                                    [&](const VideoSequence& v) { return v.name == name; });
        out.push_back(*s);
    }
    return out;
}

namespace {

void check_split(const Split& split, const std::vector<VideoSequence>& sequences) {
    std::set<std::string> names, seen;
    for (const auto& s : sequences)
        names.insert(s.name);
    for (const auto& [group, list] : split) {
        for (const auto& n : list) {
            if (!names.count(n))
                throw DataError("split '" + group + "' names unknown sequence '" + n + "'");
            if (!seen.insert(n).second)
                throw DataError("sequence '" + n + "' appears in more than one split entry");
        }
    }
}

void check_sequence(const VideoSequence& seq, const ClassTable& table) {
    const auto v = validate_sequence(seq, table);
    if (!v.empty())
        throw DataError("sequence '" + seq.name + "' frame " + std::to_string(v.front().frame) + ": " +
                        v.front().detail);
}

Dataset load_manifest(const fs::path& manifest, const LoadOptions& options) {
    const fs::path root = manifest.parent_path();
    const json j = read_json(manifest);
    try {
        if (j.at("version").get<int>() != kManifestVersion)
            throw DataError("unsupported manifest version in " + manifest.string());
        Dataset d{read_class_table(root / j.at("class_table").get<std::string>()), {}, {}};
        for (const auto& sj : j.at("sequences")) {
            VideoSequence seq;
            seq.name = sj.at("name").get<std::string>();
            seq.frame_rate = sj.at("frame_rate").get<double>();
            const std::string encoding = sj.value("label_encoding", std::string("id"));
            if (encoding != "id" && encoding != "color")
                throw DataError("label encoding must be 'id' or 'color', got '" + encoding + "'");
            for (const auto& fj : sj.at("frames")) {
                Frame f;
                f.timestamp = fj.at("timestamp").get<double>();
                f.image = read_image(root / fj.at("image").get<std::string>());
                if (fj.contains("label") && !fj.at("label").is_null()) {
                    const fs::path lp = root / fj.at("label").get<std::string>();
                    f.label = encoding == "id" ? read_label_ids(lp)
                                               : read_label_colors(lp, d.table, options.lenient_colors);
                }
                seq.frames.push_back(std::move(f));
            }
            check_sequence(seq, d.table);
            d.sequences.push_back(std::move(seq));
        }
        if (j.contains("split"))
            d.split = j.at("split").get<Split>();
        check_split(d.split, d.sequences);
        return d;
    } catch (const json::exception& e) {
        throw DataError("malformed manifest " + manifest.string() + ": " + e.what());
    }
}

struct CamVidName {
    std::string sequence;
    long frame = 0;
};

std::optional<CamVidName> parse_camvid_name(const std::string& stem) {
    const auto pos = stem.rfind('_');
    if (pos == std::string::npos || pos == 0 || pos + 1 >= stem.size())
        return std::nullopt;
    const std::string digits = stem.substr(pos + 1);
    if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }))
        return std::nullopt;
    return CamVidName{stem.substr(0, pos), std::stol(digits)};
}

Dataset load_camvid(const fs::path& root, const LoadOptions& options) {
    if (!(options.camvid_frame_rate > 0.0))
        throw UsageError("CamVid frame rate must be positive");
    Dataset d{read_class_table(root / kClassesName), {}, {}};
    std::map<std::string, std::map<long, fs::path>> frames;
    for (const auto& e : fs::directory_iterator(root / "images")) {
        if (!e.is_regular_file() || e.path().extension() != ".png")
            continue;
        const auto n = parse_camvid_name(e.path().stem().string());
        if (!n)
            throw DataError("CamVid image name must be <sequence>_<frame>.png: " + e.path().string());
        frames[n->sequence][n->frame] = e.path();
    }
    for (const auto& [name, by_number] : frames) {
        VideoSequence seq;
        seq.name = name;
        seq.frame_rate = options.camvid_frame_rate;
        for (const auto& [number, path] : by_number) {
            Frame f;
            f.timestamp = number / options.camvid_frame_rate;
            f.image = read_image(path);
            const fs::path lp = root / "labels" / (path.stem().string() + "_L.png");
            if (fs::exists(lp))
                f.label = read_label_colors(lp, d.table, options.lenient_colors);
            seq.frames.push_back(std::move(f));
        }
        check_sequence(seq, d.table);
        d.sequences.push_back(std::move(seq));
    }
    return d;
}

} // namespace

Dataset load_dataset(const fs::path& path, const LoadOptions& options) {
    if (fs::is_directory(path)) {
        if (fs::exists(path / kManifestName))
            return load_manifest(path / kManifestName, options);
        if (fs::exists(path / kClassesName) && fs::is_directory(path / "images"))
            return load_camvid(path, options);
        throw DataError(path.string() + " holds neither " + kManifestName + " nor a CamVid-style layout");
    }
    if (!fs::exists(path))
        throw DataError("dataset not found: " + path.string());
    return load_manifest(path, options);
}

fs::path save_dataset(std::span<const VideoSequence> sequences, const ClassTable& table, const fs::path& root,
                      const Split& split) {
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec)
        throw DataError("cannot create " + root.string() + ": " + ec.message());
    for (const auto& s : sequences)
        check_sequence(s, table);
    check_split(split, std::vector<VideoSequence>(sequences.begin(), sequences.end()));

    write_class_table(root / kClassesName, table);
    json j;
    j["version"] = kManifestVersion;
    j["class_table"] = kClassesName;
    j["sequences"] = json::array();
    for (std::size_t si = 0; si < sequences.size(); ++si) {
        const auto& s = sequences[si];
        const std::string dir = seq_dir(si);
        fs::create_directories(root / dir, ec);
        if (ec)
            throw DataError("cannot create " + (root / dir).string() + ": " + ec.message());
        json sj;
        sj["name"] = s.name;
        sj["frame_rate"] = s.frame_rate;
        sj["label_encoding"] = "id";
        sj["frames"] = json::array();
        for (std::size_t fi = 0; fi < s.frames.size(); ++fi) {
            const auto& f = s.frames[fi];
            json fj;
            fj["timestamp"] = f.timestamp;
            fj["image"] = dir + "/" + indexed("frame", fi);
            write_image(root / dir / indexed("frame", fi), f.image);
            if (f.label) {
                fj["label"] = dir + "/" + indexed("label", fi);
                write_label_ids(root / dir / indexed("label", fi), *f.label);
            } else {
                fj["label"] = nullptr;
            }
            sj["frames"].push_back(std::move(fj));
        }
        j["sequences"].push_back(std::move(sj));
    }
    j["split"] = split;
    const fs::path manifest = root / kManifestName;
    write_text(manifest, j.dump(2) + "\n");
    return manifest;
}

// ---------------------------------------------------------------------------
// Splits

namespace {

std::vector<double> class_histogram(const VideoSequence& s, const ClassTable& table) {
    std::vector<double> h(table.num_scored(), 0.0);
    for (const auto& f : s.frames) {
        if (!f.label)
            continue;
        for (ClassId id : f.label->ids())
            if (table.contains(id) && !table.is_unknown(id))
                h[table.channel_of(id)] += 1.0;
    }
    return h;
}

double l1_between(const std::vector<std::vector<double>>& hist, const std::vector<int>& in_train) {
    const std::size_t c = hist.front().size();
    std::vector<double> a(c, 0.0), b(c, 0.0);
    for (std::size_t i = 0; i < hist.size(); ++i) {
        auto& dst = in_train[i] ? a : b;
        for (std::size_t k = 0; k < c; ++k)
            dst[k] += hist[i][k];
    }
    const double sa = std::accumulate(a.begin(), a.end(), 0.0);
    const double sb = std::accumulate(b.begin(), b.end(), 0.0);
    double d = 0.0;
    for (std::size_t k = 0; k < c; ++k)
        d += std::abs((sa > 0 ? a[k] / sa : 0.0) - (sb > 0 ? b[k] / sb : 0.0));
    return d;
}

} // namespace

Split split_by_distribution(std::span<const VideoSequence> sequences, const ClassTable& table, double train_fraction,
                            std::uint64_t seed) {
    const int n = static_cast<int>(sequences.size());
    if (n < 2)
        throw UsageError("splitting needs at least 2 sequences");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw UsageError("train fraction must lie strictly between 0 and 1");
    const int n_train = std::clamp(static_cast<int>(std::lround(train_fraction * n)), 1, n - 1);

    std::vector<std::vector<double>> hist;
    for (const auto& s : sequences)
        hist.push_back(class_histogram(s, table));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> in_train(n, 0);
    for (int i = 0; i < n_train; ++i)
        in_train[order[i]] = 1;

    double best = l1_between(hist, in_train);
    for (;;) {
        int bi = -1, bj = -1;
        double best_swap = best;
        for (int i : order) {
            if (!in_train[i])
                continue;
            for (int j : order) {
                if (in_train[j])
                    continue;
                std::swap(in_train[i], in_train[j]);
                const double d = l1_between(hist, in_train);
                std::swap(in_train[i], in_train[j]);
                if (d < best_swap - 1e-15) {
                    best_swap = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi < 0)
            break;
        std::swap(in_train[bi], in_train[bj]);
        best = best_swap;
    }

    Split split{{"train", {}}, {"test", {}}};
    for (int i = 0; i < n; ++i)
        split[in_train[i] ? "train" : "test"].push_back(sequences[i].name);
    return split;
}

double split_histogram_distance(std::span<const VideoSequence> sequences, const ClassTable& table,
                                const Split& split) {
    std::vector<std::vector<double>> hist;
    std::vector<int> in_train;
    const auto& train = split.at("train");
    for (const auto& s : sequences) {
        hist.push_back(class_histogram(s, table));
        in_train.push_back(std::find(train.begin(), train.end(), s.name) != train.end());
    }
    if (hist.empty())
        throw UsageError("no sequences given");
    return l1_between(hist, in_train);
}

} // namespace primeseg
