#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mstcn/rng.hpp"
#include "mstcn/tensor.hpp"

namespace mstcn {

// A recorded multichannel signal at a fixed sample rate.
struct MultichannelSeries {
    double sample_rate_hz = 100.0;
    std::vector<std::string> channel_names;
    Tensor samples;  // [T x N]
    std::string subject_id;
    std::string session_id;

    int length() const { return samples.dim(0); }
    int channels() const { return samples.dim(1); }
};

// Per-sample class ids paired with a series. Class 0 is the null
// (background) class.
struct LabelTrack {
    std::vector<int> classes;
    std::vector<std::string> class_names;
};

// Annotation event: inclusive sample bounds.
struct LabelEvent {
    int start = 0;
    int end = 0;
    int class_id = 0;
};

struct LabeledSeries {
    MultichannelSeries series;
    LabelTrack labels;
};

using Dataset = std::vector<LabeledSeries>;

// ---------------------------------------------------------------- loading

// CSV with header `time,ch1,...,chN`; strictly increasing time column.
// The sample rate inferred from the median time delta must be within 1%
// of expected_rate_hz.
MultichannelSeries load_series(const std::string& path, double expected_rate_hz = 100.0);

// Either event form (`start_sample,end_sample,class`, inclusive bounds)
// or per-sample form (single `class` column of length T). Samples not
// covered by an event get the null class.
LabelTrack load_labels(const std::string& path, int t_len, const std::vector<std::string>& class_names);

// Expand events to a per-sample track. Overlapping events are rejected.
std::vector<int> expand_events(const std::vector<LabelEvent>& events, int t_len, int num_classes);

// Ordered class-name list; index 0 must be "null".
std::vector<std::string> load_schema_json(const std::string& path);
void write_schema_json(const std::string& path, const std::vector<std::string>& class_names);

void write_series_csv(const std::string& path, const MultichannelSeries& series);
void write_labels_csv(const std::string& path, const std::vector<LabelEvent>& events,
                      const std::vector<std::string>& class_names);

struct LoadedDataset {
    Dataset data;
    std::vector<std::string> class_names;
};

// Directory layout: <dir>/schema.json plus one subdirectory per subject
// holding `<session>_signal.csv` / `<session>_labels.csv` pairs.
LoadedDataset load_dataset_dir(const std::string& dir, double expected_rate_hz = 100.0);

// ---------------------------------------------------------------- batching

struct Slice {
    Tensor input;  // [Tslice x N]
    std::vector<int> labels;
    std::string series_key;  // subject/session provenance
    int start_sample = 0;
};

// Contiguous slices of slice_seconds, stepping by stride_seconds; the
// final partial slice is dropped. A series shorter than one slice yields
// an empty list.
std::vector<Slice> slice_sequence(const MultichannelSeries& series, const LabelTrack& labels,
                                  double slice_seconds = 40.0, double stride_seconds = 40.0);

struct SliceBatch {
    std::vector<const Slice*> items;
    int size() const { return static_cast<int>(items.size()); }
};

// Seeded shuffle of all slices, grouped into batches of batch_size; the
// last batch may be smaller. Pointers stay valid while `slices` lives.
std::vector<SliceBatch> make_batches(const std::vector<Slice>& slices, int batch_size, Rng& rng);

// Leave-one-subject-out split: (train, test) with test = every series of
// the held-out subject.
std::pair<Dataset, Dataset> loso_split(const Dataset& dataset, const std::string& held_out_subject);

std::vector<std::string> list_subjects(const Dataset& dataset);

// ---------------------------------------------------------------- synthesis

// Pulse family rendered into the signal for one activity class.
enum class PulseKind {
    jump,  // takeoff peak, reduced-gravity flight plateau, landing spike
    slow   // smooth low-amplitude excursion
};

struct ClassTemplate {
    std::string name;
    PulseKind kind = PulseKind::jump;
    double amp_lo = 1.0, amp_hi = 2.0;       // g
    double dur_lo = 0.4, dur_hi = 0.8;       // seconds, >= 0.2
    std::vector<double> channel_weights;     // length N mixing vector
    double event_rate_hz = 0.05;             // expected events per second
};

struct SynthSpec {
    int num_subjects = 1;
    int sessions_per_subject = 1;
    double session_seconds = 60.0;
    double sample_rate_hz = 100.0;
    int channels = 6;
    double noise_sigma = 0.05;
    std::uint64_t seed = 1;
    std::vector<ClassTemplate> class_templates;

    void validate() const;
    std::vector<std::string> class_names() const;  // "null" + template names

    static SynthSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Gaussian background noise plus non-overlapping class-specific pulses,
// labeled at exact sample extents. Bit-reproducible from the seed.
Dataset synthesize_dataset(const SynthSpec& spec);

}  // namespace mstcn
