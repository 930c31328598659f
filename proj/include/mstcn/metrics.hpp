#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "mstcn/tensor.hpp"

namespace mstcn {

// Maximal run of one non-null class; sample bounds inclusive.
struct SegmentEvent {
    int class_id = 0;
    int start = 0;
    int end = 0;

    bool operator==(const SegmentEvent&) const = default;
};

// Per-sample argmax over probability rows; ties break toward the lower
// class index.
std::vector<int> decode(const Tensor& probs);

// Maximal runs of non-null classes, sorted by start; runs shorter than
// min_duration_samples are discarded.
std::vector<SegmentEvent> extract_segments(const std::vector<int>& classes, int min_duration_samples = 10);

// Number of segments of one class. class_id must be a non-null class in
// [1, num_classes).
int count_events(const std::vector<SegmentEvent>& segments, int class_id, int num_classes);

// Number of segments whose class lies in class_set (the "all jumps"
// subset is configurable).
int count_events(const std::vector<SegmentEvent>& segments, const std::vector<int>& class_set, int num_classes);

struct PairedStats {
    double m_pd = 0.0;            // mean of d_u = true_u - pred_u
    double sd_pd = 0.0;           // sample SD of d_u (1/(U-1))
    double loa_half_width = 0.0;  // 2 * sd_pd
};

// Bland-Altman style agreement between two count lists (one entry per
// subject/unit). With paper_literal_sd the SD is computed from the
// as-printed formula sqrt(sum (m_pd - pred_u)^2 / (U-1)) instead of the
// sample SD of the differences.
PairedStats paired_stats(const std::vector<double>& true_counts, const std::vector<double>& pred_counts,
                         bool paper_literal_sd = false);

double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

// Temporal resolution of a window-wise classifier: window_samples * (1 - overlap_rate).
// The sample-wise path has resolution 1.
double window_resolution(int window_samples, double overlap_rate);

// count(pred) / count(true); values well above 1 indicate
// over-segmentation. Empty truth is rejected.
double oversegmentation_ratio(const std::vector<SegmentEvent>& pred_segments,
                              const std::vector<SegmentEvent>& true_segments);

// ------------------------------------------------------------ report

// Per-class true/pred counts for one unit (one subject or one series).
struct UnitCounts {
    std::string unit_id;
    std::vector<int> true_counts;  // indexed by class id, entry 0 unused
    std::vector<int> pred_counts;
};

struct AgreementOptions {
    std::vector<int> all_jumps_classes;  // empty = every non-null class
    bool paper_literal_sd = false;
};

// Assembles the agreement report: per-class and overall (all-jumps)
// objects with counts, m_pd, sd_pd, 2*sd_pd and a formatted "m±2sd" LoA
// string, plus Pearson r over the per-unit all-jumps counts. Statistics
// that need >= 2 units are emitted as null when there is only one.
nlohmann::json agreement_report(const std::vector<UnitCounts>& units, const std::vector<std::string>& class_names,
                                const AgreementOptions& opts = {});

}  // namespace mstcn
