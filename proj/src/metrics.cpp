#include "mstcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mstcn/errors.hpp"

namespace mstcn {

std::vector<int> decode(const Tensor& probs) {
    if (probs.rank() != 2) throw ContractError("decode: probs must be [TxC], got " + probs.shape_str());
    const int t_len = probs.dim(0);
    const int classes = probs.dim(1);
    std::vector<int> out(static_cast<std::size_t>(t_len));
    for (int t = 0; t < t_len; ++t) {
        const double* row = probs.data() + static_cast<std::size_t>(t) * classes;
        int best = 0;
        for (int c = 1; c < classes; ++c) {
            if (row[c] > row[best]) best = c;
        }
        out[static_cast<std::size_t>(t)] = best;
    }
    return out;
}

std::vector<SegmentEvent> extract_segments(const std::vector<int>& classes, int min_duration_samples) {
    if (min_duration_samples < 0) throw InvalidArgument("extract_segments: min_duration must be >= 0");
    std::vector<SegmentEvent> segments;
    const int t_len = static_cast<int>(classes.size());
    int t = 0;
    while (t < t_len) {
        const int cls = classes[static_cast<std::size_t>(t)];
        int end = t;
        while (end + 1 < t_len && classes[static_cast<std::size_t>(end + 1)] == cls) ++end;
        if (cls != 0 && end - t + 1 >= std::max(1, min_duration_samples)) {
            segments.push_back({cls, t, end});
        }
        t = end + 1;
    }
    return segments;
}

int count_events(const std::vector<SegmentEvent>& segments, int class_id, int num_classes) {
    return count_events(segments, std::vector<int>{class_id}, num_classes);
}

int count_events(const std::vector<SegmentEvent>& segments, const std::vector<int>& class_set, int num_classes) {
    for (int cls : class_set) {
        if (cls < 1 || cls >= num_classes) {
            throw InvalidArgument("count_events: class " + std::to_string(cls) + " outside [1, " +
                                  std::to_string(num_classes) + ")");
        }
    }
    int count = 0;
    for (const SegmentEvent& seg : segments) {
        if (std::find(class_set.begin(), class_set.end(), seg.class_id) != class_set.end()) ++count;
    }
    return count;
}

PairedStats paired_stats(const std::vector<double>& true_counts, const std::vector<double>& pred_counts,
                         bool paper_literal_sd) {
    if (true_counts.size() != pred_counts.size()) throw InvalidArgument("paired_stats: list lengths differ");
    const std::size_t units = true_counts.size();
    if (units < 2) throw InvalidArgument("paired_stats: need at least 2 units (SD undefined)");

    PairedStats out;
    for (std::size_t u = 0; u < units; ++u) out.m_pd += true_counts[u] - pred_counts[u];
    out.m_pd /= static_cast<double>(units);

    double ss = 0.0;
    for (std::size_t u = 0; u < units; ++u) {
        const double dev = paper_literal_sd ? out.m_pd - pred_counts[u]
                                            : (true_counts[u] - pred_counts[u]) - out.m_pd;
        ss += dev * dev;
    }
    out.sd_pd = std::sqrt(ss / static_cast<double>(units - 1));
    out.loa_half_width = 2.0 * out.sd_pd;
    return out;
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InvalidArgument("pearson_r: list lengths differ");
    const std::size_t n = x.size();
    if (n < 2) throw InvalidArgument("pearson_r: need at least 2 points");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("pearson_r: zero variance, correlation undefined");
    return sxy / std::sqrt(sxx * syy);
}

double window_resolution(int window_samples, double overlap_rate) {
    if (window_samples < 1) throw InvalidArgument("window_resolution: window must be >= 1 sample");
    if (overlap_rate < 0.0 || overlap_rate >= 1.0) {
        throw InvalidArgument("window_resolution: overlap rate must lie in [0, 1)");
    }
    return static_cast<double>(window_samples) * (1.0 - overlap_rate);
}

double oversegmentation_ratio(const std::vector<SegmentEvent>& pred_segments,
                              const std::vector<SegmentEvent>& true_segments) {
    if (true_segments.empty()) throw InvalidArgument("oversegmentation_ratio: no true segments");
    return static_cast<double>(pred_segments.size()) / static_cast<double>(true_segments.size());
}

namespace {

std::string format_loa(double m, double two_sd) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g±%.3g", m, two_sd);
    return buf;
}

// Emits {true, pred, m_pd, sd_pd, two_sd_pd, loa} for one count column.
nlohmann::json column_stats(const std::vector<double>& truth, const std::vector<double>& pred, bool literal_sd) {
    nlohmann::json j;
    double total_true = 0.0, total_pred = 0.0;
    for (double v : truth) total_true += v;
    for (double v : pred) total_pred += v;
    j["true"] = static_cast<long long>(total_true);
    j["pred"] = static_cast<long long>(total_pred);
    if (truth.size() >= 2) {
        const PairedStats s = paired_stats(truth, pred, literal_sd);
        j["m_pd"] = s.m_pd;
        j["sd_pd"] = s.sd_pd;
        j["two_sd_pd"] = s.loa_half_width;
        j["loa"] = format_loa(s.m_pd, s.loa_half_width);
    } else {
        j["m_pd"] = total_true - total_pred;
        j["sd_pd"] = nullptr;
        j["two_sd_pd"] = nullptr;
        j["loa"] = nullptr;
    }
    return j;
}

}  // namespace

nlohmann::json agreement_report(const std::vector<UnitCounts>& units, const std::vector<std::string>& class_names,
                                const AgreementOptions& opts) {
    if (units.empty()) throw InvalidArgument("agreement_report: no units");
    const int num_classes = static_cast<int>(class_names.size());
    for (const UnitCounts& u : units) {
        if (static_cast<int>(u.true_counts.size()) != num_classes ||
            static_cast<int>(u.pred_counts.size()) != num_classes) {
            throw ContractError("agreement_report: count vectors must have one entry per class");
        }
    }

    std::vector<int> all_jumps = opts.all_jumps_classes;
    if (all_jumps.empty()) {
        for (int c = 1; c < num_classes; ++c) all_jumps.push_back(c);
    }
    for (int c : all_jumps) {
        if (c < 1 || c >= num_classes) throw InvalidArgument("agreement_report: all-jumps class out of range");
    }

    nlohmann::json report;
    report["per_class"] = nlohmann::json::object();
    for (int c = 1; c < num_classes; ++c) {
        std::vector<double> truth, pred;
        for (const UnitCounts& u : units) {
            truth.push_back(u.true_counts[static_cast<std::size_t>(c)]);
            pred.push_back(u.pred_counts[static_cast<std::size_t>(c)]);
        }
        report["per_class"][class_names[static_cast<std::size_t>(c)]] = column_stats(truth, pred, opts.paper_literal_sd);
    }

    std::vector<double> truth, pred;
    for (const UnitCounts& u : units) {
        double t = 0.0, p = 0.0;
        for (int c : all_jumps) {
            t += u.true_counts[static_cast<std::size_t>(c)];
            p += u.pred_counts[static_cast<std::size_t>(c)];
        }
        truth.push_back(t);
        pred.push_back(p);
    }
    report["overall"] = column_stats(truth, pred, opts.paper_literal_sd);

    try {
        report["pearson_r"] = pearson_r(truth, pred);
    } catch (const InvalidArgument&) {
        report["pearson_r"] = nullptr;
    }

    nlohmann::json jumps = nlohmann::json::array();
    for (int c : all_jumps) jumps.push_back(class_names[static_cast<std::size_t>(c)]);
    report["all_jumps_classes"] = jumps;
    report["units"] = nlohmann::json::array();
    for (const UnitCounts& u : units) report["units"].push_back(u.unit_id);
    return report;
}

}  // namespace mstcn
