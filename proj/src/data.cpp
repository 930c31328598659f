#include "mstcn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mstcn/errors.hpp"

namespace fs = std::filesystem;

namespace mstcn {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double_cell(const std::string& cell, const std::string& path, std::size_t row) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw FormatError(path + ": row " + std::to_string(row) + ": cell \"" + cell + "\" is not a number");
    }
    if (!std::isfinite(value)) {
        throw FormatError(path + ": row " + std::to_string(row) + ": non-finite value \"" + cell + "\"");
    }
    return value;
}

long parse_int_cell(const std::string& cell, const std::string& path, std::size_t row) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    long value = 0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw FormatError(path + ": row " + std::to_string(row) + ": cell \"" + cell + "\" is not an integer");
    }
    return value;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int class_index(const std::vector<std::string>& class_names, const std::string& name, const std::string& path, std::size_t row) {
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        if (class_names[i] == name) return static_cast<int>(i);
    }
    throw SchemaError(path + ": row " + std::to_string(row) + ": class \"" + name + "\" not in schema");
}

}  // namespace

MultichannelSeries load_series(const std::string& path, double expected_rate_hz) {
    if (expected_rate_hz <= 0.0) throw InvalidArgument("load_series: expected rate must be positive");
    std::ifstream in(path);
    if (!in) throw InvalidArgument("load_series: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "time") {
        throw FormatError(path + ": header must be `time,<channel names>`");
    }

    MultichannelSeries series;
    series.channel_names.assign(header.begin() + 1, header.end());
    const std::size_t n = series.channel_names.size();

    std::vector<double> times;
    std::vector<double> flat;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != n + 1) {
            throw FormatError(path + ": row " + std::to_string(row) + ": expected " + std::to_string(n + 1) +
                              " cells, got " + std::to_string(cells.size()));
        }
        const double t = parse_double_cell(cells[0], path, row);
        if (!times.empty() && t <= times.back()) {
            throw FormatError(path + ": row " + std::to_string(row) + ": time column not strictly increasing");
        }
        times.push_back(t);
        for (std::size_t c = 0; c < n; ++c) flat.push_back(parse_double_cell(cells[c + 1], path, row));
    }
    if (times.empty()) throw FormatError(path + ": no data rows");

    if (times.size() >= 2) {
        std::vector<double> deltas(times.size() - 1);
        for (std::size_t i = 0; i + 1 < times.size(); ++i) deltas[i] = times[i + 1] - times[i];
        std::nth_element(deltas.begin(), deltas.begin() + deltas.size() / 2, deltas.end());
        const double median = deltas[deltas.size() / 2];
        const double rate = 1.0 / median;
        if (std::abs(rate - expected_rate_hz) > 0.01 * expected_rate_hz) {
            throw RateError(path + ": inferred rate " + format_double(rate) + " Hz not within 1% of " +
                            format_double(expected_rate_hz) + " Hz");
        }
    }
    series.sample_rate_hz = expected_rate_hz;
    series.samples = Tensor({static_cast<int>(times.size()), static_cast<int>(n)}, std::move(flat));
    return series;
}

std::vector<int> expand_events(const std::vector<LabelEvent>& events, int t_len, int num_classes) {
    std::vector<int> track(static_cast<std::size_t>(t_len), 0);
    std::vector<LabelEvent> sorted = events;
    std::sort(sorted.begin(), sorted.end(), [](const LabelEvent& a, const LabelEvent& b) { return a.start < b.start; });
    int prev_end = -1;
    for (const LabelEvent& ev : sorted) {
        if (ev.end < ev.start) throw FormatError("label event with end < start");
        if (ev.start < 0 || ev.end >= t_len) throw FormatError("label event outside [0, T)");
        if (ev.class_id < 0 || ev.class_id >= num_classes) throw SchemaError("label event class out of range");
        if (ev.start <= prev_end) throw OverlapError("overlapping label events at sample " + std::to_string(ev.start));
        prev_end = ev.end;
        for (int t = ev.start; t <= ev.end; ++t) track[static_cast<std::size_t>(t)] = ev.class_id;
    }
    return track;
}

LabelTrack load_labels(const std::string& path, int t_len, const std::vector<std::string>& class_names) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("load_labels: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    const std::vector<std::string> header = split_csv_line(line);

    LabelTrack track;
    track.class_names = class_names;

    if (header.size() == 3 && header[0] == "start_sample" && header[1] == "end_sample" && header[2] == "class") {
        std::vector<LabelEvent> events;
        std::size_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (line.empty()) continue;
            const std::vector<std::string> cells = split_csv_line(line);
            if (cells.size() != 3) throw FormatError(path + ": row " + std::to_string(row) + ": expected 3 cells");
            LabelEvent ev;
            ev.start = static_cast<int>(parse_int_cell(cells[0], path, row));
            ev.end = static_cast<int>(parse_int_cell(cells[1], path, row));
            ev.class_id = class_index(class_names, cells[2], path, row);
            if (ev.end < ev.start) {
                throw FormatError(path + ": row " + std::to_string(row) + ": end_sample < start_sample");
            }
            events.push_back(ev);
        }
        track.classes = expand_events(events, t_len, static_cast<int>(class_names.size()));
        return track;
    }

    if (header.size() == 1 && header[0] == "class") {
        std::size_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (line.empty()) continue;
            track.classes.push_back(class_index(class_names, split_csv_line(line)[0], path, row));
        }
        if (static_cast<int>(track.classes.size()) != t_len) {
            throw FormatError(path + ": per-sample track has " + std::to_string(track.classes.size()) +
                              " rows, series has " + std::to_string(t_len));
        }
        return track;
    }

    throw FormatError(path + ": header must be `start_sample,end_sample,class` or `class`");
}

std::vector<std::string> load_schema_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("load_schema_json: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    if (!j.is_array()) throw FormatError(path + ": schema must be a JSON array of class names");
    std::vector<std::string> names;
    for (const auto& item : j) {
        if (!item.is_string()) throw FormatError(path + ": schema entries must be strings");
        names.push_back(item.get<std::string>());
    }
    if (names.empty() || names[0] != "null") throw FormatError(path + ": schema index 0 must be \"null\"");
    std::set<std::string> unique(names.begin(), names.end());
    if (unique.size() != names.size()) throw FormatError(path + ": duplicate class names");
    return names;
}

void write_schema_json(const std::string& path, const std::vector<std::string>& class_names) {
    if (class_names.empty() || class_names[0] != "null") {
        throw InvalidArgument("write_schema_json: index 0 must be \"null\"");
    }
    std::ofstream out(path);
    if (!out) throw InvalidArgument("write_schema_json: cannot open " + path);
    out << nlohmann::json(class_names).dump(2) << '\n';
}

void write_series_csv(const std::string& path, const MultichannelSeries& series) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("write_series_csv: cannot open " + path);
    out << "time";
    for (const std::string& name : series.channel_names) out << ',' << name;
    out << '\n';
    const int t_len = series.length();
    const int n = series.channels();
    for (int t = 0; t < t_len; ++t) {
        out << format_double(static_cast<double>(t) / series.sample_rate_hz);
        for (int c = 0; c < n; ++c) out << ',' << format_double(series.samples(t, c));
        out << '\n';
    }
}

void write_labels_csv(const std::string& path, const std::vector<LabelEvent>& events,
                      const std::vector<std::string>& class_names) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("write_labels_csv: cannot open " + path);
    out << "start_sample,end_sample,class\n";
    std::vector<LabelEvent> sorted = events;
    std::sort(sorted.begin(), sorted.end(), [](const LabelEvent& a, const LabelEvent& b) { return a.start < b.start; });
    for (const LabelEvent& ev : sorted) {
        out << ev.start << ',' << ev.end << ',' << class_names.at(static_cast<std::size_t>(ev.class_id)) << '\n';
    }
}

LoadedDataset load_dataset_dir(const std::string& dir, double expected_rate_hz) {
    if (!fs::is_directory(dir)) throw InvalidArgument("load_dataset_dir: " + dir + " is not a directory");
    LoadedDataset out;
    out.class_names = load_schema_json((fs::path(dir) / "schema.json").string());

    std::vector<fs::path> subject_dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) subject_dirs.push_back(entry.path());
    }
    std::sort(subject_dirs.begin(), subject_dirs.end());

    for (const fs::path& sub : subject_dirs) {
        std::vector<fs::path> signal_files;
        for (const auto& entry : fs::directory_iterator(sub)) {
            const std::string name = entry.path().filename().string();
            if (name.size() > 11 && name.ends_with("_signal.csv")) signal_files.push_back(entry.path());
        }
        std::sort(signal_files.begin(), signal_files.end());
        for (const fs::path& sig : signal_files) {
            const std::string stem = sig.filename().string();
            const std::string session = stem.substr(0, stem.size() - 11);
            const fs::path lab = sub / (session + "_labels.csv");
            if (!fs::exists(lab)) throw InvalidArgument("load_dataset_dir: missing labels for " + sig.string());
            LabeledSeries ls;
            ls.series = load_series(sig.string(), expected_rate_hz);
            ls.series.subject_id = sub.filename().string();
            ls.series.session_id = session;
            ls.labels = load_labels(lab.string(), ls.series.length(), out.class_names);
            out.data.push_back(std::move(ls));
        }
    }
    if (out.data.empty()) throw InvalidArgument("load_dataset_dir: no series found under " + dir);
    return out;
}

std::vector<Slice> slice_sequence(const MultichannelSeries& series, const LabelTrack& labels,
                                  double slice_seconds, double stride_seconds) {
    if (labels.classes.size() != static_cast<std::size_t>(series.length())) {
        throw ContractError("slice_sequence: label track length does not match series");
    }
    const int slice_samples = static_cast<int>(std::llround(slice_seconds * series.sample_rate_hz));
    const int stride_samples = static_cast<int>(std::llround(stride_seconds * series.sample_rate_hz));
    if (slice_samples < 1) throw InvalidArgument("slice_sequence: slice shorter than one sample");
    if (stride_samples < 1) throw InvalidArgument("slice_sequence: stride shorter than one sample");

    const int t_len = series.length();
    const int n = series.channels();
    std::vector<Slice> slices;
    for (int start = 0; start + slice_samples <= t_len; start += stride_samples) {
        Slice s;
        s.series_key = series.subject_id + "/" + series.session_id;
        s.start_sample = start;
        s.labels.assign(labels.classes.begin() + start, labels.classes.begin() + start + slice_samples);
        std::vector<double> flat(static_cast<std::size_t>(slice_samples) * n);
        const double* src = series.samples.data() + static_cast<std::size_t>(start) * n;
        std::copy(src, src + flat.size(), flat.begin());
        s.input = Tensor({slice_samples, n}, std::move(flat));
        slices.push_back(std::move(s));
    }
    return slices;
}

std::vector<SliceBatch> make_batches(const std::vector<Slice>& slices, int batch_size, Rng& rng) {
    if (batch_size < 1) throw InvalidArgument("make_batches: batch_size must be >= 1");
    std::vector<const Slice*> order;
    order.reserve(slices.size());
    for (const Slice& s : slices) order.push_back(&s);
    rng.shuffle(order);

    std::vector<SliceBatch> batches;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
        SliceBatch b;
        const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
        b.items.assign(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
        batches.push_back(std::move(b));
    }
    return batches;
}

std::pair<Dataset, Dataset> loso_split(const Dataset& dataset, const std::string& held_out_subject) {
    Dataset train, test;
    for (const LabeledSeries& ls : dataset) {
        (ls.series.subject_id == held_out_subject ? test : train).push_back(ls);
    }
    if (test.empty()) throw InvalidArgument("loso_split: unknown subject \"" + held_out_subject + "\"");
    if (train.empty()) throw InvalidArgument("loso_split: splitting a single-subject dataset leaves no training data");
    return {std::move(train), std::move(test)};
}

std::vector<std::string> list_subjects(const Dataset& dataset) {
    std::vector<std::string> subjects;
    for (const LabeledSeries& ls : dataset) {
        if (std::find(subjects.begin(), subjects.end(), ls.series.subject_id) == subjects.end()) {
            subjects.push_back(ls.series.subject_id);
        }
    }
    std::sort(subjects.begin(), subjects.end());
    return subjects;
}

// ---------------------------------------------------------------- synthesis

void SynthSpec::validate() const {
    if (num_subjects < 1) throw SpecError("synth spec: num_subjects must be >= 1");
    if (sessions_per_subject < 1) throw SpecError("synth spec: sessions_per_subject must be >= 1");
    if (session_seconds <= 0.0) throw SpecError("synth spec: session_seconds must be positive");
    if (sample_rate_hz <= 0.0) throw SpecError("synth spec: sample_rate_hz must be positive");
    if (channels < 1) throw SpecError("synth spec: channels must be >= 1");
    if (noise_sigma < 0.0) throw SpecError("synth spec: noise_sigma must be >= 0");

    std::set<std::string> names{"null"};
    double occupancy = 0.0;
    for (const ClassTemplate& ct : class_templates) {
        if (ct.name.empty() || !names.insert(ct.name).second) {
            throw SpecError("synth spec: class names must be unique and not \"null\"");
        }
        if (ct.dur_lo < 0.2 || ct.dur_hi < ct.dur_lo) {
            throw SpecError("synth spec: class \"" + ct.name + "\": durations must be >= 0.2 s and ordered");
        }
        if (ct.amp_hi < ct.amp_lo) throw SpecError("synth spec: class \"" + ct.name + "\": amplitude range inverted");
        if (ct.event_rate_hz < 0.0) throw SpecError("synth spec: class \"" + ct.name + "\": negative event rate");
        if (static_cast<int>(ct.channel_weights.size()) != channels) {
            throw SpecError("synth spec: class \"" + ct.name + "\": channel_weights must have one entry per channel");
        }
        occupancy += ct.event_rate_hz * 0.5 * (ct.dur_lo + ct.dur_hi);
    }
    // Mean fraction of time covered by events; past ~60% placement
    // rejection cannot be expected to terminate.
    if (occupancy > 0.6) throw SpecError("synth spec: event packing infeasible (expected occupancy > 60%)");
}

std::vector<std::string> SynthSpec::class_names() const {
    std::vector<std::string> names{"null"};
    for (const ClassTemplate& ct : class_templates) names.push_back(ct.name);
    return names;
}

namespace {

PulseKind pulse_kind_from_string(const std::string& s) {
    if (s == "jump") return PulseKind::jump;
    if (s == "slow") return PulseKind::slow;
    throw FormatError("synth spec: pulse kind must be \"jump\" or \"slow\", got \"" + s + "\"");
}

const char* pulse_kind_to_string(PulseKind k) { return k == PulseKind::jump ? "jump" : "slow"; }

void reject_unknown_fields(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw FormatError(where + ": unknown field \"" + it.key() + "\"");
    }
}

// Pulse profile at phase u in [0, 1], unit amplitude.
double pulse_value(PulseKind kind, double u) {
    constexpr double pi = 3.14159265358979323846;
    if (kind == PulseKind::slow) return std::sin(pi * u);
    if (u < 0.25) return std::sin(pi * u / 0.25);              // takeoff peak
    if (u < 0.7) return -0.6;                                  // flight plateau
    return 1.2 * std::sin(pi * (u - 0.7) / 0.3);               // landing spike
}

}  // namespace

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
    reject_unknown_fields(j,
                          {"num_subjects", "sessions_per_subject", "session_seconds", "sample_rate_hz", "channels",
                           "noise_sigma", "seed", "class_templates"},
                          "synth spec");
    SynthSpec spec;
    spec.num_subjects = j.value("num_subjects", spec.num_subjects);
    spec.sessions_per_subject = j.value("sessions_per_subject", spec.sessions_per_subject);
    spec.session_seconds = j.value("session_seconds", spec.session_seconds);
    spec.sample_rate_hz = j.value("sample_rate_hz", spec.sample_rate_hz);
    spec.channels = j.value("channels", spec.channels);
    spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("class_templates")) {
        for (const auto& cj : j.at("class_templates")) {
            reject_unknown_fields(cj, {"name", "kind", "amplitude", "duration", "channel_weights", "event_rate_hz"},
                                  "synth spec class template");
            ClassTemplate ct;
            ct.name = cj.at("name").get<std::string>();
            ct.kind = pulse_kind_from_string(cj.value("kind", std::string("jump")));
            if (cj.contains("amplitude")) {
                ct.amp_lo = cj.at("amplitude").at(0).get<double>();
                ct.amp_hi = cj.at("amplitude").at(1).get<double>();
            }
            if (cj.contains("duration")) {
                ct.dur_lo = cj.at("duration").at(0).get<double>();
                ct.dur_hi = cj.at("duration").at(1).get<double>();
            }
            ct.channel_weights = cj.value("channel_weights", std::vector<double>{});
            ct.event_rate_hz = cj.value("event_rate_hz", ct.event_rate_hz);
            spec.class_templates.push_back(std::move(ct));
        }
    }
    spec.validate();
    return spec;
}

nlohmann::json SynthSpec::to_json() const {
    nlohmann::json templates = nlohmann::json::array();
    for (const ClassTemplate& ct : class_templates) {
        templates.push_back({{"name", ct.name},
                             {"kind", pulse_kind_to_string(ct.kind)},
                             {"amplitude", {ct.amp_lo, ct.amp_hi}},
                             {"duration", {ct.dur_lo, ct.dur_hi}},
                             {"channel_weights", ct.channel_weights},
                             {"event_rate_hz", ct.event_rate_hz}});
    }
    return nlohmann::json{{"num_subjects", num_subjects},
                          {"sessions_per_subject", sessions_per_subject},
                          {"session_seconds", session_seconds},
                          {"sample_rate_hz", sample_rate_hz},
                          {"channels", channels},
                          {"noise_sigma", noise_sigma},
                          {"seed", seed},
                          {"class_templates", templates}};
}

Dataset synthesize_dataset(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int t_len = static_cast<int>(std::llround(spec.session_seconds * spec.sample_rate_hz));
    const std::vector<std::string> names = spec.class_names();

    Dataset dataset;
    for (int subject = 0; subject < spec.num_subjects; ++subject) {
        for (int session = 0; session < spec.sessions_per_subject; ++session) {
            LabeledSeries ls;
            char id[32];
            std::snprintf(id, sizeof(id), "subj%02d", subject + 1);
            ls.series.subject_id = id;
            std::snprintf(id, sizeof(id), "session%02d", session + 1);
            ls.series.session_id = id;
            ls.series.sample_rate_hz = spec.sample_rate_hz;
            for (int c = 0; c < spec.channels; ++c) ls.series.channel_names.push_back("ch" + std::to_string(c + 1));

            std::vector<double> flat(static_cast<std::size_t>(t_len) * spec.channels);
            for (double& v : flat) v = rng.gauss(0.0, spec.noise_sigma);
            Tensor samples({t_len, spec.channels}, std::move(flat));

            std::vector<LabelEvent> events;
            for (std::size_t ci = 0; ci < spec.class_templates.size(); ++ci) {
                const ClassTemplate& ct = spec.class_templates[ci];
                const int count = rng.poisson(ct.event_rate_hz * spec.session_seconds);
                for (int e = 0; e < count; ++e) {
                    const double dur_s = rng.uniform(ct.dur_lo, ct.dur_hi);
                    const double amp = rng.uniform(ct.amp_lo, ct.amp_hi);
                    const int dur = std::max(1, static_cast<int>(std::llround(dur_s * spec.sample_rate_hz)));
                    if (dur >= t_len) throw SpecError("synth: event longer than the session");

                    int start = -1;
                    for (int attempt = 0; attempt < 1000; ++attempt) {
                        const int cand = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(t_len - dur)));
                        bool clash = false;
                        for (const LabelEvent& ev : events) {
                            // Keep at least one null sample between events so
                            // run extraction can never merge neighbours.
                            if (cand <= ev.end + 1 && ev.start <= cand + dur) {
                                clash = true;
                                break;
                            }
                        }
                        if (!clash) {
                            start = cand;
                            break;
                        }
                    }
                    if (start < 0) throw SpecError("synth: event packing failed (rate too high for session length)");

                    LabelEvent ev{start, start + dur - 1, static_cast<int>(ci) + 1};
                    events.push_back(ev);
                    for (int t = ev.start; t <= ev.end; ++t) {
                        const double u = dur == 1 ? 0.5 : static_cast<double>(t - ev.start) / (dur - 1);
                        const double g = amp * pulse_value(ct.kind, u);
                        for (int c = 0; c < spec.channels; ++c) {
                            samples(t, c) += ct.channel_weights[static_cast<std::size_t>(c)] * g;
                        }
                    }
                }
            }

            ls.series.samples = std::move(samples);
            ls.labels.class_names = names;
            ls.labels.classes = expand_events(events, t_len, static_cast<int>(names.size()));
            dataset.push_back(std::move(ls));
        }
    }
    return dataset;
}

}  // namespace mstcn
