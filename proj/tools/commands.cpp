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

#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "primeseg/dataio.hpp"
#include "primeseg/metrics.hpp"
#include "primeseg/subn.hpp"
#include "primeseg/synthgen.hpp"

namespace primeseg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream is(path);
    if (!is)
        throw DataError("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw UsageError("cannot parse " + path.string() + ": " + e.what());
    }
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os || !(os << text))
        throw DataError("cannot write " + path.string());
}

// Writes to `path`, or to `out` when no path was given.
void emit(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty())
        out << text;
    else
        write_file(path, text);
}

void read_train_config(const json& j, nn::TrainConfig& c) {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
}

std::optional<int> period_from_json(const json& j) {
    if (j.is_number_integer())
        return parse_period(std::to_string(j.get<int>()));
    if (j.is_string())
        return parse_period(j.get<std::string>());
    throw UsageError("priming_period must be an integer or \"inf\"");
}

const std::vector<std::string> kCheckpointNames = {"priming.ckpt", "approximating.ckpt", "ensemble.ckpt"};

PipelineNets load_nets(const fs::path& dir, const ClassTable& table) {
    const int c = table.num_scored();
    PipelineNets nets{{nn::default_priming_spec(c), {}},
                      {nn::default_approximating_spec(c), {}},
                      {nn::default_ensemble_spec(c), {}}};
    nets.priming.params = nn::load_checkpoint(dir / kCheckpointNames[0], nets.priming.spec);
    nets.approximating.params = nn::load_checkpoint(dir / kCheckpointNames[1], nets.approximating.spec);
    nets.ensemble.params = nn::load_checkpoint(dir / kCheckpointNames[2], nets.ensemble.spec);
    return nets;
}

PipelineNets seeded_nets(const ClassTable& table, std::uint64_t seed) {
    const int c = table.num_scored();
    const auto ps = nn::default_priming_spec(c), as = nn::default_approximating_spec(c),
               es = nn::default_ensemble_spec(c);
    return {{ps, nn::init_params(ps, seed)}, {as, nn::init_params(as, seed + 1)}, {es, nn::init_params(es, seed + 2)}};
}

std::string default_split(const Dataset& d, const std::string& preferred) {
    return d.split.count(preferred) ? preferred : "all";
}

std::vector<int> parse_strides(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || v < 1)
            throw UsageError("strides must be positive integers, got '" + item + "'");
        out.push_back(v);
    }
    if (out.empty())
        throw UsageError("no strides given");
    return out;
}

std::vector<std::optional<int>> parse_periods(const std::string& text) {
    std::vector<std::optional<int>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_period(item));
    if (out.empty())
        throw UsageError("no priming periods given");
    return out;
}

std::vector<LabelMap> annotated_labels(std::span<const VideoSequence> seqs) {
    std::vector<LabelMap> out;
    for (const auto& s : seqs)
        for (const auto& f : s.frames)
            if (f.label)
                out.push_back(*f.label);
    return out;
}

struct Globals {
    std::uint64_t seed = 0;
    int threads = 1;
    std::string config;
};

} // namespace

// ---------------------------------------------------------------------------

CostModel read_cost_model(const fs::path& path) {
    const json j = read_json_file(path);
    CostModel c;
    try {
        c.cost_prime = j.at("cost_prime").get<double>();
        c.cost_approx = j.at("cost_approx").get<double>();
        c.cost_ensemble = j.at("cost_ensemble").get<double>();
        c.provenance = j.value("provenance", std::string("file: ") + path.filename().string());
    } catch (const json::exception& e) {
        throw UsageError("cost model " + path.string() + ": " + e.what());
    }
    c.validate();
    return c;
}

void write_cost_model(const fs::path& path, const CostModel& costs) {
    const json j = {{"cost_prime", costs.cost_prime},
                    {"cost_approx", costs.cost_approx},
                    {"cost_ensemble", costs.cost_ensemble},
                    {"provenance", costs.provenance}};
    write_file(path, j.dump(2) + "\n");
}

TrainingSettings default_training_settings() {
    TrainingSettings s;
    s.priming.learning_rate = 0.01;
    s.priming.epochs = 12;
    s.priming.batch_size = 4;
    s.priming.clip_norm = 5.0;
    s.joint.learning_rate = 0.03;
    s.joint.epochs = 30;
    s.joint.batch_size = 4;
    s.joint.clip_norm = 5.0;
    s.joint_options.unroll_length = 3;
    return s;
}

TrainingSettings read_training_settings(const fs::path& path) {
    TrainingSettings s = default_training_settings();
    const json j = read_json_file(path);
    try {
        if (j.contains("priming"))
            read_train_config(j.at("priming"), s.priming);
        if (j.contains("joint"))
            read_train_config(j.at("joint"), s.joint);
        if (j.contains("schedule")) {
            const auto& sj = j.at("schedule");
            if (sj.contains("priming_period"))
                s.schedule.priming_period = period_from_json(sj.at("priming_period"));
            s.schedule.downsample_factor = sj.value("downsample_factor", s.schedule.downsample_factor);
        }
        s.joint_options.unroll_length = j.value("unroll_length", s.joint_options.unroll_length);
        s.joint_options.passthrough_init = j.value("passthrough_init", s.joint_options.passthrough_init);
    } catch (const json::exception& e) {
        throw UsageError("config " + path.string() + ": " + e.what());
    }
    s.priming.validate();
    s.joint.validate();
    s.schedule.validate();
    return s;
}

// ---------------------------------------------------------------------------

namespace {

int cmd_density(const std::string& dataset, const std::string& csv, bool lenient, std::ostream& out) {
    const Dataset d = load_dataset(dataset, {.lenient_colors = lenient});
    const DensityReport r = density_report(d.sequences, d.table);
    std::ostringstream os;
    write_density_csv(os, r);
    out << "sequences: " << d.sequences.size() << "\n"
        << "spatial density: " << format_value(r.spatial_density) << "\n"
        << "temporal density (Hz): " << format_value(r.temporal_density) << "\n";
    if (!csv.empty())
        write_file(csv, os.str());
    return kOk;
}

int cmd_subn(const std::string& dataset, const std::string& split, const std::string& strides,
             const std::string& csv, const Globals& g, std::ostream& out) {
    const Dataset d = load_dataset(dataset);
    const auto seqs = d.select(split);
    const auto labels = annotated_labels(seqs);
    if (labels.empty())
        throw DataError("no annotated frames in split '" + split + "'");
    const auto s = parse_strides(strides);
    const auto reports = run_subn(labels, s, d.table, g.threads);
    std::ostringstream os;
    write_subn_csv(os, reports, d.table);
    emit(csv, os.str(), out);
    return kOk;
}

int cmd_generate(const std::string& dir, int count, SceneConfig scene, double train_fraction, const Globals& g,
                 std::ostream& out) {
    scene.seed = g.seed;
    if (!g.config.empty()) {
        const json j = read_json_file(g.config);
        if (j.contains("scene")) {
            const auto& s = j.at("scene");
            scene.width = s.value("width", scene.width);
            scene.height = s.value("height", scene.height);
            scene.num_frames = s.value("frames", scene.num_frames);
            scene.frame_rate = s.value("frame_rate", scene.frame_rate);
            scene.bonnet_rows = s.value("unknown_rows", scene.bonnet_rows);
            scene.num_cars = s.value("cars", scene.num_cars);
            scene.num_trucks = s.value("trucks", scene.num_trucks);
            scene.max_speed = s.value("max_speed", scene.max_speed);
            scene.noise_sigma = s.value("noise", scene.noise_sigma);
        }
    }
    scene.validate();
    if (count < 1)
        throw UsageError("--count must be >= 1");
    const auto seqs = generate_dataset(scene, count);
    Split split;
    if (count >= 2)
        split = split_by_distribution(seqs, ClassTable::highway(), train_fraction, g.seed);
    const fs::path manifest = save_dataset(seqs, ClassTable::highway(), dir, split);
    out << "wrote " << count << " sequences to " << manifest.string() << "\n";
    return kOk;
}

int cmd_train(const std::string& dataset, const std::string& stage, const std::string& split_arg,
              const std::string& ckpt_dir, const Globals& g, std::ostream& out) {
    const Dataset d = load_dataset(dataset);
    const std::string split = split_arg.empty() ? default_split(d, "train") : split_arg;
    const auto seqs = d.select(split);
    TrainingSettings s = g.config.empty() ? default_training_settings() : read_training_settings(g.config);
    s.priming.seed = g.seed;
    s.joint.seed = g.seed;
    const int c = d.table.num_scored();
    const fs::path dir(ckpt_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw DataError("cannot create " + dir.string() + ": " + ec.message());
    auto log = [&](const char* what) {
        return [&out, what](int epoch, double loss) {
            out << what << " epoch " << epoch << " loss " << format_value(loss) << "\n";
        };
    };

    if (stage == "priming") {
        const auto spec = nn::default_priming_spec(c);
        const auto r = train_priming(seqs, spec, s.priming, d.table, log("priming"));
        nn::save_checkpoint(dir / kCheckpointNames[0], spec, r.params);
    } else if (stage == "joint") {
        const auto pspec = nn::default_priming_spec(c);
        const Network priming{pspec, nn::load_checkpoint(dir / kCheckpointNames[0], pspec)};
        const auto as = nn::default_approximating_spec(c), es = nn::default_ensemble_spec(c);
        const auto r = train_joint(seqs, priming, as, es, s.schedule, s.joint, d.table, s.joint_options, log("joint"));
        nn::save_checkpoint(dir / kCheckpointNames[1], as, r.approximating);
        nn::save_checkpoint(dir / kCheckpointNames[2], es, r.ensemble);
    } else if (stage == "approximating-only") {
        const auto as = nn::default_approximating_spec(c);
        const auto r =
            train_approximating_only(seqs, as, s.schedule.downsample_factor, s.joint, d.table, log("approximating"));
        nn::save_checkpoint(dir / "approximating_only.ckpt", as, r.params);
    } else {
        throw UsageError("--stage must be priming, joint or approximating-only");
    }
    out << "checkpoints in " << dir.string() << "\n";
    return kOk;
}

int cmd_run(const std::string& dataset, const std::string& ckpt_dir, const std::string& split_arg,
            const std::string& period, int factor, const std::string& costs_path, const std::string& out_dir,
            std::ostream& out) {
    const Dataset d = load_dataset(dataset);
    const std::string split = split_arg.empty() ? default_split(d, "test") : split_arg;
    const auto seqs = d.select(split);
    if (seqs.empty())
        throw DataError("split '" + split + "' has no sequences");
    ScheduleConfig sched{parse_period(period), factor};
    sched.validate();
    const PipelineNets nets = load_nets(ckpt_dir, d.table);
    const CostModel costs = costs_path.empty()
                                ? analytic_cost_model(nets, seqs.front().height(), seqs.front().width(), factor)
                                : read_cost_model(costs_path);

    const fs::path root(out_dir);
    ConfusionMatrix cm(d.table.num_scored());
    std::vector<SequenceResult> results;
    std::vector<std::string> names;
    double total_cost = 0.0, total_frames = 0.0;
    for (std::size_t si = 0; si < seqs.size(); ++si) {
        const auto& seq = seqs[si];
        SequenceResult r = segment_sequence(seq, nets, sched, d.table, costs);
        std::error_code ec;
        fs::create_directories(prediction_path(root / "predictions", si, 0).parent_path(), ec);
        if (ec)
            throw DataError("cannot create prediction directory: " + ec.message());
        for (std::size_t fi = 0; fi < seq.frames.size(); ++fi) {
            write_label_ids(prediction_path(root / "predictions", si, fi), r.labels[fi]);
            if (seq.frames[fi].label)
                cm.accumulate(*seq.frames[fi].label, r.labels[fi], d.table);
            total_cost += r.cost_trace[fi];
        }
        total_frames += static_cast<double>(seq.frames.size());
        names.push_back(seq.name);
        r.scores.clear();
        results.push_back(std::move(r));
    }
    MetricsReport report = make_report(cm, d.table);
    report.relative_runtime = total_cost / (total_frames * costs.cost_prime);
    std::ostringstream metrics, trace;
    write_metrics_csv(metrics, report, d.table);
    write_cost_trace_csv(trace, names, results);
    write_file(root / "metrics.csv", metrics.str());
    write_file(root / "cost_trace.csv", trace.str());
    out << "mIoU " << format_value(report.miou) << ", relative runtime " << format_value(*report.relative_runtime)
        << " (" << costs.provenance << ")\n";
    return kOk;
}

int cmd_budget(const std::string& costs_path, bool calibrate, const std::string& ckpt_dir, int height, int width,
               int factor, int repeats, const std::string& periods, int length, const std::string& save_costs,
               const std::string& csv, const Globals& g, std::ostream& out) {
    CostModel costs;
    if (calibrate) {
        const ClassTable table = ClassTable::highway();
        const PipelineNets nets = ckpt_dir.empty() ? seeded_nets(table, g.seed) : load_nets(ckpt_dir, table);
        costs = calibrate_cost_model(nets, height, width, factor, repeats);
    } else if (!costs_path.empty()) {
        costs = read_cost_model(costs_path);
    } else {
        throw UsageError("budget needs --costs FILE or --calibrate");
    }
    if (!save_costs.empty())
        write_cost_model(save_costs, costs);
    const auto ks = parse_periods(periods);
    const auto curve = budget_curve(costs, ks, length);
    std::ostringstream os;
    write_budget_csv(os, curve, costs);
    emit(csv, os.str(), out);
    return kOk;
}

int cmd_eval(const std::string& dataset, const std::string& pred_dir, const std::string& split_arg,
             const std::string& csv, std::ostream& out) {
    const Dataset d = load_dataset(dataset);
    const std::string split = split_arg.empty() ? default_split(d, "test") : split_arg;
    const auto seqs = d.select(split);
    ConfusionMatrix cm(d.table.num_scored());
    for (std::size_t si = 0; si < seqs.size(); ++si)
        for (std::size_t fi = 0; fi < seqs[si].frames.size(); ++fi)
            if (seqs[si].frames[fi].label)
                cm.accumulate_allow_unknown(*seqs[si].frames[fi].label,
                                            read_label_ids(prediction_path(pred_dir, si, fi)), d.table);
    std::ostringstream os;
    write_metrics_csv(os, make_report(cm, d.table), d.table);
    emit(csv, os.str(), out);
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Budget-aware video segmentation toolkit", "primeseg"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Seed for generation, initialization and shuffling")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads for parallel stages")
        ->check(CLI::Range(1, 256))
        ->capture_default_str();
    app.add_option("--config", g.config, "JSON settings file")->check(CLI::ExistingFile);

    std::string dataset, csv, split, ckpt, period = "inf", costs, out_dir, stage, pred_dir;
    std::string strides = "2,4,8,16,32", periods = "1,2,5,inf", save_costs;
    int factor = 4, length = 60, height = 240, width = 320, repeats = 30, count = 20;
    double train_fraction = 0.75;
    bool calibrate = false, lenient = false;
    SceneConfig scene;

    auto* density = app.add_subcommand("density", "Spatial and temporal annotation density");
    density->add_option("dataset", dataset, "Dataset directory or manifest")->required();
    density->add_option("--out", csv, "CSV output path");
    density->add_flag("--lenient", lenient, "Map unlisted label colors to unknown");

    auto* subn = app.add_subcommand("subn", "Sub-N subsampling oracle");
    subn->add_option("dataset", dataset, "Dataset directory or manifest")->required();
    subn->add_option("--strides", strides, "Comma-separated strides")->capture_default_str();
    subn->add_option("--split", split, "Split to evaluate, or 'all'")->default_str("all");
    subn->add_option("--out", csv, "CSV output path (standard output if omitted)");

    auto* train = app.add_subcommand("train", "Train the priming net, or the approximating and ensemble nets");
    train->add_option("dataset", dataset, "Dataset directory or manifest")->required();
    train->add_option("--stage", stage, "priming, joint or approximating-only")
        ->required()
        ->check(CLI::IsMember({"priming", "joint", "approximating-only"}));
    train->add_option("--split", split, "Training split (default: train, else all)");
    train->add_option("--checkpoints", ckpt, "Checkpoint directory")->required();

    auto* runc = app.add_subcommand("run", "Segment a split and write predictions, metrics and cost trace");
    runc->add_option("dataset", dataset, "Dataset directory or manifest")->required();
    runc->add_option("--checkpoints", ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
    runc->add_option("--period", period, "Priming period k, or 'inf'")->capture_default_str();
    runc->add_option("--factor", factor, "Downsample factor of the approximating input")->capture_default_str();
    runc->add_option("--split", split, "Split to run (default: test, else all)");
    runc->add_option("--costs", costs, "Cost model file (default: multiply-add counts)")->check(CLI::ExistingFile);
    runc->add_option("--out", out_dir, "Output directory")->required();

    auto* budget = app.add_subcommand("budget", "Relative runtime per priming period");
    auto* costs_opt = budget->add_option("--costs", costs, "Cost model file")->check(CLI::ExistingFile);
    budget->add_flag("--calibrate", calibrate, "Time the networks instead of reading a cost model")
        ->excludes(costs_opt);
    budget->add_option("--checkpoints", ckpt, "Checkpoint directory for calibration (default: seeded nets)");
    budget->add_option("--height", height, "Calibration frame height")->capture_default_str();
    budget->add_option("--width", width, "Calibration frame width")->capture_default_str();
    budget->add_option("--factor", factor, "Downsample factor")->capture_default_str();
    budget->add_option("--repeats", repeats, "Timed runs per network")->capture_default_str();
    budget->add_option("--periods", periods, "Comma-separated priming periods")->capture_default_str();
    budget->add_option("--length", length, "Sequence length in frames")->capture_default_str();
    budget->add_option("--save-costs", save_costs, "Write the cost model used to this file");
    budget->add_option("--out", csv, "CSV output path (standard output if omitted)");

    auto* eval = app.add_subcommand("eval", "Score a prediction directory against ground truth");
    eval->add_option("dataset", dataset, "Ground-truth dataset directory or manifest")->required();
    eval->add_option("predictions", pred_dir, "Prediction directory (seq_%03d/label_%04d.img)")
        ->required()
        ->check(CLI::ExistingDirectory);
    eval->add_option("--split", split, "Split to score (default: test, else all)");
    eval->add_option("--out", csv, "CSV output path (standard output if omitted)");

    auto* gen = app.add_subcommand("generate", "Write a synthetic highway dataset");
    gen->add_option("--out", out_dir, "Output directory")->required();
    gen->add_option("--count", count, "Number of sequences")->capture_default_str();
    gen->add_option("--frames", scene.num_frames, "Frames per sequence")->capture_default_str();
    gen->add_option("--width", scene.width, "Frame width")->capture_default_str();
    gen->add_option("--height", scene.height, "Frame height")->capture_default_str();
    gen->add_option("--frame-rate", scene.frame_rate, "Frames per second")->capture_default_str();
    gen->add_option("--train-fraction", train_fraction, "Share of sequences in the train split")
        ->capture_default_str();

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (density->parsed())
            return cmd_density(dataset, csv, lenient, out);
        if (subn->parsed())
            return cmd_subn(dataset, split.empty() ? "all" : split, strides, csv, g, out);
        if (train->parsed())
            return cmd_train(dataset, stage, split, ckpt, g, out);
        if (runc->parsed())
            return cmd_run(dataset, ckpt, split, period, factor, costs, out_dir, out);
        if (budget->parsed())
            return cmd_budget(costs, calibrate, ckpt, height, width, factor, repeats, periods, length, save_costs,
                              csv, g, out);
        if (eval->parsed())
            return cmd_eval(dataset, pred_dir, split, csv, out);
        if (gen->parsed())
            return cmd_generate(out_dir, count, scene, train_fraction, g, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kNumeric;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}

} // namespace primeseg::cli
