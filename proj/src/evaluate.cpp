#include "mstcn/evaluate.hpp"

#include "mstcn/errors.hpp"
#include "mstcn/train.hpp"

namespace mstcn {

SeriesEval evaluate_series(const MsTcnNet& net, const LabeledSeries& ls, int min_duration_samples) {
    const int num_classes = net.config.num_classes;
    if (static_cast<int>(ls.labels.class_names.size()) != num_classes) {
        throw ContractError("evaluate_series: schema has " + std::to_string(ls.labels.class_names.size()) +
                            " classes, model expects " + std::to_string(num_classes));
    }

    const std::vector<Tensor> probs = predict(net, ls.series.samples);
    const std::vector<int> predicted = decode(probs.back());
    const std::vector<SegmentEvent> true_segments = extract_segments(ls.labels.classes, 0);
    const std::vector<SegmentEvent> pred_segments = extract_segments(predicted, min_duration_samples);

    SeriesEval out;
    out.true_segment_count = static_cast<int>(true_segments.size());
    out.pred_segment_count = static_cast<int>(pred_segments.size());
    out.counts.unit_id = ls.series.subject_id + "/" + ls.series.session_id;
    out.counts.true_counts.assign(static_cast<std::size_t>(num_classes), 0);
    out.counts.pred_counts.assign(static_cast<std::size_t>(num_classes), 0);
    for (int c = 1; c < num_classes; ++c) {
        out.counts.true_counts[static_cast<std::size_t>(c)] = count_events(true_segments, c, num_classes);
        out.counts.pred_counts[static_cast<std::size_t>(c)] = count_events(pred_segments, c, num_classes);
    }
    return out;
}

}  // namespace mstcn
