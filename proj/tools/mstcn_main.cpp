// mstcn: synthesize labeled IMU-like datasets, train and evaluate
// multi-stage temporal convolutional networks, and count activity events.
//
// Exit codes: 0 ok, 1 check failed, 2 usage, 3 format, 4 contract, 5 diverged.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "mstcn/data.hpp"
#include "mstcn/errors.hpp"
#include "mstcn/evaluate.hpp"
#include "mstcn/gradcheck.hpp"
#include "mstcn/loss.hpp"
#include "mstcn/metrics.hpp"
#include "mstcn/model.hpp"
#include "mstcn/rng.hpp"
#include "mstcn/train.hpp"
#include "mstcn/util.hpp"
#include "mstcn/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mstcn::InvalidArgument("cannot open " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw mstcn::FormatError(path + ": " + e.what());
    }
}

struct ManifestInfo {
    std::string command;
    std::vector<std::string> config_paths;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string started;
};

// Written last, so every output it names exists.
void write_run_manifest(const std::string& path, const ManifestInfo& info) {
    const json manifest{{"schema_version", mstcn::kReportSchemaVersion},
                        {"tool_version", mstcn::kVersion},
                        {"command", info.command},
                        {"config_paths", info.config_paths},
                        {"seeds", info.seeds},
                        {"inputs", info.inputs},
                        {"outputs", info.outputs},
                        {"started_utc", info.started},
                        {"finished_utc", mstcn::iso8601_utc_now()}};
    mstcn::atomic_write_file(path, manifest.dump(2) + "\n");
}

std::vector<std::string> split_comma(const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

// "2..5" or "1,3,5".
std::vector<int> parse_stage_list(const std::string& s) {
    std::vector<int> stages;
    try {
        const auto dots = s.find("..");
        if (dots != std::string::npos) {
            const int lo = std::stoi(s.substr(0, dots));
            const int hi = std::stoi(s.substr(dots + 2));
            for (int v = lo; v <= hi; ++v) stages.push_back(v);
        } else {
            for (const std::string& part : split_comma(s)) stages.push_back(std::stoi(part));
        }
    } catch (const std::exception&) {
        throw mstcn::InvalidArgument("cannot parse stage list \"" + s + "\"");
    }
    if (stages.empty()) throw mstcn::InvalidArgument("empty stage list \"" + s + "\"");
    for (int v : stages) {
        if (v < 1) throw mstcn::InvalidArgument("stage counts must be >= 1");
    }
    return stages;
}

std::vector<int> class_ids_from_names(const std::vector<std::string>& names, const std::vector<std::string>& schema) {
    std::vector<int> ids;
    for (const std::string& name : names) {
        const auto it = std::find(schema.begin(), schema.end(), name);
        if (it == schema.end()) throw mstcn::SchemaError("class \"" + name + "\" not in schema");
        const int id = static_cast<int>(it - schema.begin());
        if (id == 0) throw mstcn::InvalidArgument("the null class cannot be counted");
        ids.push_back(id);
    }
    return ids;
}

// Fill channel/class counts from the dataset unless the config pinned
// them; a pinned value that disagrees with the data is a contract error.
void reconcile_model_with_data(mstcn::ModelConfig& model, const json& model_json, int data_channels, int data_classes) {
    if (model_json.contains("in_channels") && model.in_channels != data_channels) {
        throw mstcn::ContractError("config pins in_channels=" + std::to_string(model.in_channels) + " but data has " +
                                   std::to_string(data_channels) + " channels");
    }
    if (model_json.contains("classes") && model.num_classes != data_classes) {
        throw mstcn::ContractError("config pins classes=" + std::to_string(model.num_classes) + " but schema has " +
                                   std::to_string(data_classes) + " classes");
    }
    model.in_channels = data_channels;
    model.num_classes = data_classes;
}

mstcn::Dataset restrict_to_subjects(const mstcn::Dataset& data, const std::vector<std::string>& subjects, bool keep) {
    mstcn::Dataset out;
    for (const mstcn::LabeledSeries& ls : data) {
        const bool held = std::find(subjects.begin(), subjects.end(), ls.series.subject_id) != subjects.end();
        if (held == keep) out.push_back(ls);
    }
    return out;
}

void require_subjects_exist(const mstcn::Dataset& data, const std::vector<std::string>& subjects) {
    const std::vector<std::string> present = mstcn::list_subjects(data);
    for (const std::string& s : subjects) {
        if (std::find(present.begin(), present.end(), s) == present.end()) {
            throw mstcn::InvalidArgument("subject \"" + s + "\" not in dataset");
        }
    }
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
    std::string spec_path;
    std::string out_dir;
};

int cmd_synth(const SynthArgs& args) {
    ManifestInfo info;
    info.command = "synth";
    info.config_paths = {args.spec_path};
    info.started = mstcn::iso8601_utc_now();
    const mstcn::SynthSpec spec = mstcn::SynthSpec::from_json(load_json_file(args.spec_path));
    info.seeds.push_back(spec.seed);
    info.inputs.push_back(args.spec_path);

    const mstcn::Dataset dataset = mstcn::synthesize_dataset(spec);
    const std::vector<std::string> names = spec.class_names();

    fs::create_directories(args.out_dir);
    const std::string schema_path = (fs::path(args.out_dir) / "schema.json").string();
    mstcn::write_schema_json(schema_path, names);
    info.outputs.push_back(schema_path);

    for (const mstcn::LabeledSeries& ls : dataset) {
        const fs::path subject_dir = fs::path(args.out_dir) / ls.series.subject_id;
        fs::create_directories(subject_dir);
        const std::string signal_path = (subject_dir / (ls.series.session_id + "_signal.csv")).string();
        const std::string labels_path = (subject_dir / (ls.series.session_id + "_labels.csv")).string();
        mstcn::write_series_csv(signal_path, ls.series);

        std::vector<mstcn::LabelEvent> events;
        for (const mstcn::SegmentEvent& seg : mstcn::extract_segments(ls.labels.classes, 0)) {
            events.push_back({seg.start, seg.end, seg.class_id});
        }
        mstcn::write_labels_csv(labels_path, events, names);
        info.outputs.push_back(signal_path);
        info.outputs.push_back(labels_path);
    }

    write_run_manifest((fs::path(args.out_dir) / "manifest.json").string(), info);
    std::cout << json{{"subjects", spec.num_subjects},
                      {"series", dataset.size()},
                      {"classes", names},
                      {"out", args.out_dir}}
                     .dump()
              << '\n';
    return 0;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
    std::string data_dir;
    std::string config_path;
    std::string out_ckpt;
    std::string metrics_path;  // default derived from out_ckpt
    std::string exclude_subjects;
    double rate = 100.0;
    // Flag overrides (negative / zero = keep JSON value).
    int epochs = 0;
    double lr = 0.0;
    int batch_size = 0;
    long long seed = -1;
};

int cmd_train(const TrainArgs& args) {
    ManifestInfo info;
    info.command = "train";
    info.config_paths = {args.config_path};
    info.started = mstcn::iso8601_utc_now();
    const json config_json = load_json_file(args.config_path);
    mstcn::TrainConfig config = mstcn::TrainConfig::from_json(config_json);
    if (args.epochs > 0) config.epochs = args.epochs;
    if (args.lr > 0.0) config.lr = args.lr;
    if (args.batch_size > 0) config.batch_size = args.batch_size;
    if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);

    mstcn::LoadedDataset loaded = mstcn::load_dataset_dir(args.data_dir, args.rate);
    mstcn::Dataset dataset = std::move(loaded.data);
    if (!args.exclude_subjects.empty()) {
        const std::vector<std::string> excluded = split_comma(args.exclude_subjects);
        require_subjects_exist(dataset, excluded);
        dataset = restrict_to_subjects(dataset, excluded, false);
        if (dataset.empty()) throw mstcn::InvalidArgument("excluding those subjects leaves no training data");
    }

    const json model_json = config_json.value("model", json::object());
    reconcile_model_with_data(config.model, model_json, dataset.front().series.channels(),
                              static_cast<int>(loaded.class_names.size()));

    const std::string metrics_path = args.metrics_path.empty() ? args.out_ckpt + ".metrics.jsonl" : args.metrics_path;
    std::ofstream metrics(metrics_path);
    if (!metrics) throw mstcn::InvalidArgument("cannot open metrics log " + metrics_path);

    info.seeds.push_back(config.seed);
    info.inputs.push_back(args.data_dir);

    const mstcn::TrainResult result = mstcn::train(config, dataset, args.out_ckpt, &metrics, &std::cerr);
    metrics.close();

    info.outputs.push_back(args.out_ckpt);
    info.outputs.push_back(metrics_path);
    write_run_manifest(args.out_ckpt + ".manifest.json", info);

    const mstcn::EpochStats& last = result.epochs.back();
    std::cout << json{{"epochs_run", result.epochs.size()},
                      {"steps", result.steps},
                      {"final_mean_total", last.mean_total},
                      {"checkpoint", args.out_ckpt}}
                     .dump()
              << '\n';
    return 0;
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
    std::string data_dir;
    std::string ckpt_path;
    std::string held_out;
    std::string report_path;
    std::string jumps;  // comma list of class names; empty = all non-null
    int min_duration = 10;
    double rate = 100.0;
    bool paper_literal_sd = false;
};

int cmd_eval(const EvalArgs& args) {
    ManifestInfo info;
    info.command = "eval";
    info.started = mstcn::iso8601_utc_now();
    mstcn::CheckpointMeta meta;
    const mstcn::MsTcnNet net = mstcn::load_checkpoint(args.ckpt_path, &meta);

    const mstcn::LoadedDataset loaded = mstcn::load_dataset_dir(args.data_dir, args.rate);
    if (static_cast<int>(loaded.class_names.size()) != net.config.num_classes) {
        throw mstcn::ContractError("schema has " + std::to_string(loaded.class_names.size()) +
                                   " classes, checkpoint expects " + std::to_string(net.config.num_classes));
    }
    const std::vector<std::string> held = split_comma(args.held_out);
    if (held.empty()) throw mstcn::InvalidArgument("--held-out must name at least one subject");
    require_subjects_exist(loaded.data, held);
    const mstcn::Dataset test = restrict_to_subjects(loaded.data, held, true);

    mstcn::AgreementOptions opts;
    opts.paper_literal_sd = args.paper_literal_sd;
    if (!args.jumps.empty()) opts.all_jumps_classes = class_ids_from_names(split_comma(args.jumps), loaded.class_names);

    std::vector<mstcn::UnitCounts> units;
    for (const mstcn::LabeledSeries& ls : test) {
        units.push_back(mstcn::evaluate_series(net, ls, args.min_duration).counts);
    }

    json report = mstcn::agreement_report(units, loaded.class_names, opts);
    report["schema_version"] = mstcn::kReportSchemaVersion;
    report["tool_version"] = mstcn::kVersion;
    report["config_hash"] = mstcn::fnv1a_hex(net.config.to_json().dump());
    report["checkpoint"] = args.ckpt_path;
    report["held_out"] = held;
    report["min_duration_samples"] = args.min_duration;
    mstcn::atomic_write_file(args.report_path, report.dump(2) + "\n");

    info.seeds.push_back(meta.seed);
    info.inputs = {args.data_dir, args.ckpt_path};
    info.outputs = {args.report_path};
    write_run_manifest(args.report_path + ".manifest.json", info);
    std::cout << report.dump() << '\n';
    return 0;
}

// ------------------------------------------------------------------ sweep

struct SweepArgs {
    std::string data_dir;
    std::string config_path;
    std::string stages = "1..5";
    std::string held_out;
    std::string report_path;
    int min_duration = 10;
    double rate = 100.0;
    int jobs = 1;
};

int cmd_sweep_stages(const SweepArgs& args) {
    ManifestInfo info;
    info.command = "sweep-stages";
    info.config_paths = {args.config_path};
    info.started = mstcn::iso8601_utc_now();
    const json config_json = load_json_file(args.config_path);
    const mstcn::TrainConfig base_config = mstcn::TrainConfig::from_json(config_json);
    const std::vector<int> stage_counts = parse_stage_list(args.stages);
    if (args.jobs < 1) throw mstcn::InvalidArgument("--jobs must be >= 1");

    const mstcn::LoadedDataset loaded = mstcn::load_dataset_dir(args.data_dir, args.rate);
    std::vector<std::string> held = split_comma(args.held_out);
    if (held.empty()) held = {mstcn::list_subjects(loaded.data).front()};
    require_subjects_exist(loaded.data, held);
    const mstcn::Dataset train_set = restrict_to_subjects(loaded.data, held, false);
    const mstcn::Dataset test_set = restrict_to_subjects(loaded.data, held, true);
    if (train_set.empty()) throw mstcn::InvalidArgument("holding out those subjects leaves no training data");

    struct StageResult {
        int num_stages = 0;
        json row;
    };
    std::vector<StageResult> results(stage_counts.size());

    auto run_one = [&](std::size_t idx) {
        mstcn::TrainConfig config = base_config;
        config.model.num_stages = stage_counts[idx];
        reconcile_model_with_data(config.model, config_json.value("model", json::object()),
                                  train_set.front().series.channels(), static_cast<int>(loaded.class_names.size()));
        const mstcn::TrainResult trained = mstcn::train(config, train_set);

        std::vector<mstcn::UnitCounts> units;
        long long true_segments = 0, pred_segments = 0;
        for (const mstcn::LabeledSeries& ls : test_set) {
            const mstcn::SeriesEval ev = mstcn::evaluate_series(trained.net, ls, args.min_duration);
            units.push_back(ev.counts);
            true_segments += ev.true_segment_count;
            pred_segments += ev.pred_segment_count;
        }

        // Mean |true - pred| per class across held-out units.
        json per_class = json::object();
        const int num_classes = static_cast<int>(loaded.class_names.size());
        for (int c = 1; c < num_classes; ++c) {
            double abs_diff = 0.0;
            for (const mstcn::UnitCounts& u : units) {
                abs_diff += std::abs(u.true_counts[static_cast<std::size_t>(c)] - u.pred_counts[static_cast<std::size_t>(c)]);
            }
            per_class[loaded.class_names[static_cast<std::size_t>(c)]] = abs_diff / static_cast<double>(units.size());
        }

        std::vector<double> truth, pred;
        double all_abs = 0.0;
        for (const mstcn::UnitCounts& u : units) {
            double t = 0.0, p = 0.0;
            for (int c = 1; c < num_classes; ++c) {
                t += u.true_counts[static_cast<std::size_t>(c)];
                p += u.pred_counts[static_cast<std::size_t>(c)];
            }
            truth.push_back(t);
            pred.push_back(p);
            all_abs += std::abs(t - p);
        }

        json row;
        row["num_stages"] = stage_counts[idx];
        row["per_class_abs_mean_diff"] = per_class;
        row["all_jumps_abs_mean_diff"] = all_abs / static_cast<double>(units.size());
        row["oversegmentation_ratio"] =
            true_segments == 0 ? json() : json(static_cast<double>(pred_segments) / static_cast<double>(true_segments));
        try {
            row["pearson_r"] = mstcn::pearson_r(truth, pred);
        } catch (const mstcn::InvalidArgument&) {
            row["pearson_r"] = nullptr;
        }
        results[idx] = {stage_counts[idx], std::move(row)};
    };

    if (args.jobs == 1) {
        for (std::size_t i = 0; i < stage_counts.size(); ++i) run_one(i);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex mu;
        for (int w = 0; w < std::min<int>(args.jobs, static_cast<int>(stage_counts.size())); ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t idx;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (next >= stage_counts.size()) return;
                        idx = next++;
                    }
                    run_one(idx);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    json report;
    report["schema_version"] = mstcn::kReportSchemaVersion;
    report["tool_version"] = mstcn::kVersion;
    report["config_hash"] = mstcn::fnv1a_hex(base_config.to_json().dump());
    report["held_out"] = held;
    report["min_duration_samples"] = args.min_duration;
    report["stages"] = json::array();
    for (const StageResult& r : results) report["stages"].push_back(r.row);
    mstcn::atomic_write_file(args.report_path, report.dump(2) + "\n");

    info.seeds.push_back(base_config.seed);
    info.inputs = {args.data_dir};
    info.outputs = {args.report_path};
    write_run_manifest(args.report_path + ".manifest.json", info);
    std::cout << report.dump() << '\n';
    return 0;
}

// ------------------------------------------------------------------ gradcheck

struct GradCheckArgs {
    std::string config_path;
    int slice_samples = 200;
    long long seed = 1;
    double h = 1e-5;
    double threshold = 1e-4;
    int max_coords = 0;
};

int cmd_gradcheck(const GradCheckArgs& args) {
    const mstcn::ModelConfig config = mstcn::ModelConfig::from_json(load_json_file(args.config_path));
    if (args.slice_samples < 2) throw mstcn::InvalidArgument("--slice-samples must be >= 2");

    mstcn::MsTcnNet net = mstcn::build_model(config, static_cast<std::uint64_t>(args.seed));
    mstcn::Rng rng(static_cast<std::uint64_t>(args.seed) + 0x51ce5eed);
    mstcn::Tensor slice({args.slice_samples, config.in_channels});
    for (std::size_t i = 0; i < slice.size(); ++i) slice[i] = rng.gauss(0.0, 1.0);
    std::vector<int> labels(static_cast<std::size_t>(args.slice_samples));
    for (int& l : labels) l = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(config.num_classes)));

    mstcn::LossOptions opts;
    opts.lambda = config.lambda;
    opts.tau = config.tau;
    // Central differences measure the true derivative, so the smoothing
    // term's previous-sample detach is disabled for the check.
    opts.tmse_detach_previous = false;

    auto loss = [&]() {
        std::vector<mstcn::Tensor> probs;
        for (const mstcn::StageOutput& so : mstcn::model_forward(net, slice)) probs.push_back(so.probs);
        return mstcn::total_loss(probs, labels, opts).total;
    };
    auto populate = [&]() {
        net.zero_grads();
        const mstcn::ModelForwardCache fwd = mstcn::model_forward_cached(net, slice);
        std::vector<mstcn::Tensor> probs;
        for (const mstcn::StageOutput& so : fwd.outputs) probs.push_back(so.probs);
        mstcn::model_backward(net, fwd, mstcn::total_loss_backward(probs, labels, opts));
    };

    const mstcn::GradCheckReport report = mstcn::grad_check(loss, populate, net.params(), args.h, args.max_coords,
                                                            static_cast<std::uint64_t>(args.seed));
    const bool pass = report.max_rel_error < args.threshold;
    std::cout << json{{"max_rel_error", report.max_rel_error},
                      {"coords_checked", report.coords_checked},
                      {"worst_param", report.worst_param},
                      {"worst_index", report.worst_index},
                      {"threshold", args.threshold},
                      {"pass", pass}}
                     .dump()
              << '\n';
    return pass ? 0 : 1;
}

// ------------------------------------------------------------------ paramcount / count

struct ParamCountArgs {
    std::string config_path;
};

int cmd_paramcount(const ParamCountArgs& args) {
    const mstcn::ModelConfig config = mstcn::ModelConfig::from_json(load_json_file(args.config_path));
    std::cout << mstcn::count_parameters(config) << '\n';
    return 0;
}

struct CountArgs {
    std::string ckpt_path;
    std::string series_path;
    std::string schema_path;
    std::string jumps;
    int min_duration = 10;
    double rate = 100.0;
};

int cmd_count(const CountArgs& args) {
    const mstcn::MsTcnNet net = mstcn::load_checkpoint(args.ckpt_path);
    const std::vector<std::string> schema = mstcn::load_schema_json(args.schema_path);
    if (static_cast<int>(schema.size()) != net.config.num_classes) {
        throw mstcn::ContractError("schema has " + std::to_string(schema.size()) + " classes, checkpoint expects " +
                                   std::to_string(net.config.num_classes));
    }
    const mstcn::MultichannelSeries series = mstcn::load_series(args.series_path, args.rate);
    if (series.channels() != net.config.in_channels) {
        throw mstcn::ContractError("series has " + std::to_string(series.channels()) + " channels, checkpoint expects " +
                                   std::to_string(net.config.in_channels));
    }

    const std::vector<mstcn::Tensor> probs = mstcn::predict(net, series.samples);
    const std::vector<mstcn::SegmentEvent> segments =
        mstcn::extract_segments(mstcn::decode(probs.back()), args.min_duration);

    std::vector<int> jump_ids;
    if (args.jumps.empty()) {
        for (int c = 1; c < net.config.num_classes; ++c) jump_ids.push_back(c);
    } else {
        jump_ids = class_ids_from_names(split_comma(args.jumps), schema);
    }

    json per_class = json::object();
    for (int c = 1; c < net.config.num_classes; ++c) {
        per_class[schema[static_cast<std::size_t>(c)]] = mstcn::count_events(segments, c, net.config.num_classes);
    }
    std::cout << json{{"per_class", per_class},
                      {"all_jumps", mstcn::count_events(segments, jump_ids, net.config.num_classes)},
                      {"min_duration_samples", args.min_duration}}
                     .dump()
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sample-wise multi-stage TCN toolkit for multichannel inertial time series"};
    app.set_version_flag("--version", mstcn::kVersion);
    app.require_subcommand(1);

    const char* env_data = std::getenv("MSTCN_DATA_DIR");
    const std::string default_data = env_data ? env_data : "";

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
    synth->add_option("--spec", synth_args.spec_path, "Synthesis spec JSON")->required();
    synth->add_option("--out", synth_args.out_dir, "Output dataset directory")->required();

    TrainArgs train_args;
    train_args.data_dir = default_data;
    CLI::App* train = app.add_subcommand("train", "Train a model on a dataset directory");
    train->add_option("--data", train_args.data_dir, "Dataset directory (default from MSTCN_DATA_DIR)");
    train->add_option("--config", train_args.config_path, "Train config JSON")->required();
    train->add_option("--out", train_args.out_ckpt, "Output checkpoint path")->required();
    train->add_option("--metrics", train_args.metrics_path, "Metrics log path (default <out>.metrics.jsonl)");
    train->add_option("--exclude-subject", train_args.exclude_subjects, "Comma list of subjects to drop (LOSO)");
    train->add_option("--rate", train_args.rate, "Expected sample rate in Hz");
    train->add_option("--epochs", train_args.epochs, "Override epochs");
    train->add_option("--lr", train_args.lr, "Override learning rate");
    train->add_option("--batch-size", train_args.batch_size, "Override batch size");
    train->add_option("--seed", train_args.seed, "Override seed");

    EvalArgs eval_args;
    eval_args.data_dir = default_data;
    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on held-out subjects");
    eval->add_option("--data", eval_args.data_dir, "Dataset directory (default from MSTCN_DATA_DIR)");
    eval->add_option("--ckpt", eval_args.ckpt_path, "Checkpoint path")->required();
    eval->add_option("--held-out", eval_args.held_out, "Comma list of held-out subjects")->required();
    eval->add_option("--report", eval_args.report_path, "Agreement report JSON output")->required();
    eval->add_option("--jumps", eval_args.jumps, "Comma list of class names forming \"all jumps\"");
    eval->add_option("--min-duration", eval_args.min_duration, "Minimum predicted segment length in samples");
    eval->add_option("--rate", eval_args.rate, "Expected sample rate in Hz");
    eval->add_flag("--paper-literal-sd", eval_args.paper_literal_sd, "Use the as-printed SD formula");

    SweepArgs sweep_args;
    sweep_args.data_dir = default_data;
    CLI::App* sweep = app.add_subcommand("sweep-stages", "Train and evaluate a range of stage counts");
    sweep->add_option("--data", sweep_args.data_dir, "Dataset directory (default from MSTCN_DATA_DIR)");
    sweep->add_option("--config", sweep_args.config_path, "Train config JSON")->required();
    sweep->add_option("--stages", sweep_args.stages, "Stage counts, e.g. 1..5 or 1,2,4");
    sweep->add_option("--held-out", sweep_args.held_out, "Comma list of held-out subjects (default first subject)");
    sweep->add_option("--report", sweep_args.report_path, "Sweep report JSON output")->required();
    sweep->add_option("--min-duration", sweep_args.min_duration, "Minimum predicted segment length in samples");
    sweep->add_option("--rate", sweep_args.rate, "Expected sample rate in Hz");
    sweep->add_option("--jobs", sweep_args.jobs, "Parallel trainings (default 1, sequential)");

    GradCheckArgs gc_args;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full model+loss gradient");
    gradcheck->add_option("--config", gc_args.config_path, "Model config JSON")->required();
    gradcheck->add_option("--slice-samples", gc_args.slice_samples, "Synthetic slice length");
    gradcheck->add_option("--seed", gc_args.seed, "Seed for weights, slice and labels");
    gradcheck->add_option("--h", gc_args.h, "Central difference step");
    gradcheck->add_option("--threshold", gc_args.threshold, "Max relative error to pass");
    gradcheck->add_option("--max-coords", gc_args.max_coords, "Check a random subset of >= 100 coords (0 = all)");

    ParamCountArgs pc_args;
    CLI::App* paramcount = app.add_subcommand("paramcount", "Print the exact trainable parameter count");
    paramcount->add_option("--config", pc_args.config_path, "Model config JSON")->required();

    CountArgs count_args;
    CLI::App* count = app.add_subcommand("count", "Count predicted events in one series");
    count->add_option("--ckpt", count_args.ckpt_path, "Checkpoint path")->required();
    count->add_option("--series", count_args.series_path, "Signal CSV")->required();
    count->add_option("--schema", count_args.schema_path, "Class schema JSON")->required();
    count->add_option("--jumps", count_args.jumps, "Comma list of class names forming \"all jumps\"");
    count->add_option("--min-duration", count_args.min_duration, "Minimum predicted segment length in samples");
    count->add_option("--rate", count_args.rate, "Expected sample rate in Hz");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" || e.get_name() == "CallForVersion") {
            return app.exit(e);
        }
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_args);
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (sweep->parsed()) return cmd_sweep_stages(sweep_args);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_args);
        if (paramcount->parsed()) return cmd_paramcount(pc_args);
        if (count->parsed()) return cmd_count(count_args);
    } catch (const mstcn::DivergedError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 5;
    } catch (const mstcn::ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const mstcn::FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const mstcn::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const mstcn::CheckInvalidError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
