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

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "primeseg/dataio.hpp"
#include "primeseg/metrics.hpp"
#include "primeseg/synthgen.hpp"
#include "unit/helpers.hpp"

using namespace primeseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("primeseg_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Sequence whose labels are all `id` except one pixel of `other`.
VideoSequence flat_sequence(const std::string& name, ClassId id, int count_other, ClassId other) {
    VideoSequence s = testutil::random_sequence(2, 4, 4, 1, name.size());
    s.name = name;
    for (auto& f : s.frames) {
        f.label = LabelMap(4, 4, id);
        for (int i = 0; i < count_other; ++i)
            f.label->ids()[i] = other;
    }
    return s;
}

} // namespace

TEST_CASE("save then load is the identity") {
    TempDir dir("roundtrip");
    SceneConfig c;
    c.width = 40;
    c.height = 24;
    c.num_frames = 4;
    auto seqs = generate_dataset(c, 2);
    seqs[1].frames[2].label.reset();
    const ClassTable t = ClassTable::highway();
    const Split split{{"train", {"seq_000"}}, {"test", {"seq_001"}}};
    const fs::path manifest = save_dataset(seqs, t, dir.path, split);
    CHECK(manifest == dir.path / "manifest.cfg");
    CHECK(fs::exists(dir.path / "classes.cfg"));
    CHECK(fs::exists(dir.path / "seq_001" / "frame_0003.img"));
    CHECK_FALSE(fs::exists(dir.path / "seq_001" / "label_0002.img"));

    const Dataset d = load_dataset(dir.path);
    CHECK(d.table == t);
    CHECK(d.sequences == seqs);
    CHECK(d.split == split);
    CHECK(load_dataset(manifest).sequences == seqs);
    CHECK(d.select("test").front().name == "seq_001");
    CHECK(d.select("all").size() == 2);
    CHECK_THROWS_AS(d.select("val"), UsageError);
}

TEST_CASE("file layout") {
    TempDir dir("layout");
    CHECK(fs::exists(save_dataset({}, testutil::ab_table(), dir.path)));
    CHECK(load_dataset(dir.path).sequences.empty());

    TempDir two("layout_two");
    const std::vector<VideoSequence> one{testutil::random_sequence(2, 3, 5, 2, 1)};
    save_dataset(one, testutil::ab_table(), two.path);
    std::set<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(two.path))
        if (e.is_regular_file())
            files.insert(fs::relative(e.path(), two.path).generic_string());
    CHECK(files == std::set<std::string>{"classes.cfg", "manifest.cfg", "seq_000/frame_0000.img",
                                         "seq_000/frame_0001.img", "seq_000/label_0000.img",
                                         "seq_000/label_0001.img"});
    CHECK(prediction_path("out", 3, 12) == fs::path("out/seq_003/label_0012.img"));
}

TEST_CASE("generated sequence keeps its frame rate through a reload") {
    TempDir dir("rate");
    SceneConfig c;
    c.width = 32;
    c.height = 16;
    c.num_frames = 60;
    const std::vector<VideoSequence> seqs{generate(c)};
    save_dataset(seqs, ClassTable::highway(), dir.path);
    const Dataset d = load_dataset(dir.path);
    CHECK(temporal_density(d.sequences[0]) == doctest::Approx(30.0).epsilon(1e-12));
}

TEST_CASE("load errors") {
    TempDir dir("errors");
    const std::vector<VideoSequence> seqs{testutil::random_sequence(2, 3, 5, 2, 1)};
    save_dataset(seqs, testutil::ab_table(), dir.path);
    CHECK_THROWS_AS(load_dataset(dir.path / "nope"), DataError);
    fs::remove(dir.path / "seq_000" / "frame_0001.img");
    CHECK_THROWS_AS(load_dataset(dir.path), DataError);
    write_image(dir.path / "seq_000" / "frame_0001.img", testutil::random_image(4, 5, 3));
    CHECK_THROWS_AS(load_dataset(dir.path), DataError);
    CHECK_THROWS_AS(save_dataset(seqs, testutil::ab_table(), dir.path, Split{{"train", {"ghost"}}}), DataError);
}

TEST_CASE("strict color decoding names the color and pixel") {
    TempDir dir("colors");
    const ClassTable t = testutil::ab_table();
    Tensor px(3, 2, 3);
    px.at(0, 0, 0) = 1.0;                                  // (255,0,0) -> a
    px.at(1, 1, 2) = 1.0;                                  // (0,255,0) -> b
    px.at(0, 1, 1) = 10 / 255.0, px.at(2, 1, 1) = 20 / 255.0; // unmapped
    write_image(dir.path / "l.png", Image(px));
    try {
        read_label_colors(dir.path / "l.png", t, false);
        FAIL("expected an error");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("(10,0,20)") != std::string::npos);
        CHECK(msg.find("x=1, y=1") != std::string::npos);
    }
    const LabelMap m = read_label_colors(dir.path / "l.png", t, true);
    CHECK(m.at(0, 0) == 0);
    CHECK(m.at(1, 2) == 1);
    CHECK(m.at(1, 1) == t.unknown_id());
    CHECK(m.at(0, 1) == t.unknown_id()); // black is the unknown color
}

TEST_CASE("CamVid-style directory") {
    const fs::path root = fs::path(PRIMESEG_FIXTURES) / "camvid_small";
    const Dataset d = load_dataset(root);
    REQUIRE(d.sequences.size() == 2);
    CHECK(d.sequences[0].name == "0001TP");
    CHECK(d.sequences[0].frames.size() == 61);
    int labeled = 0;
    for (const auto& f : d.sequences[0].frames)
        labeled += f.label.has_value();
    CHECK(labeled == 3);
    CHECK(d.sequences[0].frames[30].label.has_value());
    CHECK_FALSE(d.sequences[0].frames[29].label.has_value());
    CHECK(density_report(d.sequences, d.table).temporal_density == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("class table file round trip") {
    TempDir dir("table");
    write_class_table(dir.path / "c.cfg", ClassTable::highway());
    CHECK(read_class_table(dir.path / "c.cfg") == ClassTable::highway());
}

TEST_CASE("split of identical sequences") {
    const ClassTable t = testutil::ab_table();
    const std::vector<VideoSequence> seqs{flat_sequence("x", 0, 3, 1), flat_sequence("y", 0, 3, 1)};
    const Split s = split_by_distribution(seqs, t, 0.5, 1);
    CHECK(s.at("train").size() == 1);
    CHECK(s.at("test").size() == 1);
    CHECK(split_histogram_distance(seqs, t, s) == 0.0);
}

TEST_CASE("split balances skewed sequences, checked against every split") {
    const ClassTable t = testutil::ab_table();
    const std::vector<VideoSequence> seqs{flat_sequence("a1", 0, 2, 1), flat_sequence("a2", 0, 3, 1),
                                          flat_sequence("b1", 1, 2, 0), flat_sequence("b2", 1, 4, 0)};
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Split s = split_by_distribution(seqs, t, 0.5, seed);
        const double got = split_histogram_distance(seqs, t, s);
        double best = 1e9;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) {
                Split c{{"train", {seqs[i].name, seqs[j].name}}, {"test", {}}};
                for (int k = 0; k < 4; ++k)
                    if (k != i && k != j)
                        c["test"].push_back(seqs[k].name);
                best = std::min(best, split_histogram_distance(seqs, t, c));
            }
        CHECK(got == best);
        const auto& tr = s.at("train");
        const bool one_a = std::count_if(tr.begin(), tr.end(), [](const std::string& n) { return n[0] == 'a'; }) == 1;
        CHECK(one_a);
        std::set<std::string> all(tr.begin(), tr.end());
        all.insert(s.at("test").begin(), s.at("test").end());
        CHECK(all.size() == 4);
    }
    CHECK(split_by_distribution(seqs, t, 0.5, 9) == split_by_distribution(seqs, t, 0.5, 9));
    const std::vector<VideoSequence> lone{seqs[0]};
    CHECK_THROWS_AS(split_by_distribution(lone, t, 0.5, 1), UsageError);
}
