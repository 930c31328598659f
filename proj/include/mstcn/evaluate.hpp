#pragma once

#include <string>
#include <vector>

#include "mstcn/data.hpp"
#include "mstcn/metrics.hpp"
#include "mstcn/model.hpp"

namespace mstcn {

// Full-sequence prediction of one labeled series reduced to event counts.
// Ground-truth counts come from the label track with no duration filter;
// predicted counts from the final stage's decoded argmax with the given
// minimum duration.
struct SeriesEval {
    UnitCounts counts;
    int true_segment_count = 0;
    int pred_segment_count = 0;
};

SeriesEval evaluate_series(const MsTcnNet& net, const LabeledSeries& ls, int min_duration_samples = 10);

}  // namespace mstcn
