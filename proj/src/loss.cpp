#include "mstcn/loss.hpp"

#include <cmath>
#include <string>

#include "mstcn/errors.hpp"

namespace mstcn {

namespace {

constexpr double kLogClamp = 1e-12;

void require_probs_and_labels(const Tensor& probs, const std::vector<int>& labels) {
    if (probs.rank() != 2) throw ContractError("loss: probs must be [TxC], got " + probs.shape_str());
    if (static_cast<std::size_t>(probs.dim(0)) != labels.size()) {
        throw ContractError("loss: label track length does not match probs");
    }
    const int classes = probs.dim(1);
    for (std::size_t t = 0; t < labels.size(); ++t) {
        if (labels[t] < 0 || labels[t] >= classes) {
            throw InvalidArgument("loss: label " + std::to_string(labels[t]) + " at sample " + std::to_string(t) +
                                  " outside [0, " + std::to_string(classes) + ")");
        }
    }
}

double norm_factor(const Tensor& probs, CeNorm norm) {
    const double t_len = static_cast<double>(probs.dim(0));
    const double classes = static_cast<double>(probs.dim(1));
    return norm == CeNorm::paper ? t_len * classes : t_len;
}

}  // namespace

const char* to_string(CeNorm norm) { return norm == CeNorm::paper ? "paper" : "conventional"; }

CeNorm ce_norm_from_string(const std::string& s) {
    if (s == "paper") return CeNorm::paper;
    if (s == "conventional") return CeNorm::conventional;
    throw InvalidArgument("ce_norm must be \"paper\" or \"conventional\", got \"" + s + "\"");
}

double cross_entropy(const Tensor& probs, const std::vector<int>& labels, CeNorm norm) {
    require_probs_and_labels(probs, labels);
    const int t_len = probs.dim(0);
    double sum = 0.0;
    for (int t = 0; t < t_len; ++t) {
        const double p = std::max(probs(t, labels[static_cast<std::size_t>(t)]), kLogClamp);
        sum -= std::log(p);
    }
    return sum / norm_factor(probs, norm);
}

Tensor cross_entropy_backward(const Tensor& probs, const std::vector<int>& labels, CeNorm norm, double upstream) {
    require_probs_and_labels(probs, labels);
    const int t_len = probs.dim(0);
    const double scale = upstream / norm_factor(probs, norm);
    Tensor dprobs(probs.shape());
    for (int t = 0; t < t_len; ++t) {
        const int y = labels[static_cast<std::size_t>(t)];
        const double p = probs(t, y);
        // Clamped region has zero slope.
        if (p > kLogClamp) dprobs(t, y) = -scale / p;
    }
    return dprobs;
}

double tmse(const Tensor& probs, double tau) {
    if (probs.rank() != 2) throw ContractError("tmse: probs must be [TxC], got " + probs.shape_str());
    if (tau <= 0.0) throw InvalidArgument("tmse: tau must be positive");
    const int t_len = probs.dim(0);
    const int classes = probs.dim(1);
    if (t_len < 2) throw InvalidArgument("tmse: need at least 2 samples");

    double sum = 0.0;
    for (int t = 1; t < t_len; ++t) {
        for (int c = 0; c < classes; ++c) {
            const double cur = std::log(std::max(probs(t, c), kLogClamp));
            const double prev = std::log(std::max(probs(t - 1, c), kLogClamp));
            const double delta = std::min(std::abs(cur - prev), tau);
            sum += delta * delta;
        }
    }
    return sum / (static_cast<double>(t_len) * classes);
}

Tensor tmse_backward(const Tensor& probs, double tau, bool detach_previous, double upstream) {
    if (probs.rank() != 2) throw ContractError("tmse: probs must be [TxC], got " + probs.shape_str());
    if (tau <= 0.0) throw InvalidArgument("tmse: tau must be positive");
    const int t_len = probs.dim(0);
    const int classes = probs.dim(1);
    if (t_len < 2) throw InvalidArgument("tmse: need at least 2 samples");

    const double scale = upstream / (static_cast<double>(t_len) * classes);
    Tensor dprobs(probs.shape());
    for (int t = 1; t < t_len; ++t) {
        for (int c = 0; c < classes; ++c) {
            const double pc = probs(t, c);
            const double pp = probs(t - 1, c);
            const double diff = std::log(std::max(pc, kLogClamp)) - std::log(std::max(pp, kLogClamp));
            const double adiff = std::abs(diff);
            if (adiff == 0.0 || adiff > tau) continue;  // clamp plateau and flat point
            const double sign = diff > 0.0 ? 1.0 : -1.0;
            const double base = scale * 2.0 * adiff * sign;
            if (pc > kLogClamp) dprobs(t, c) += base / pc;
            if (!detach_previous && pp > kLogClamp) dprobs(t - 1, c) -= base / pp;
        }
    }
    return dprobs;
}

StageLoss stage_loss(const Tensor& probs, const std::vector<int>& labels, const LossOptions& opts) {
    StageLoss out;
    out.ce = cross_entropy(probs, labels, opts.ce_norm);
    out.tmse = tmse(probs, opts.tau);
    out.combined = out.ce + opts.lambda * out.tmse;
    return out;
}

LossBreakdown total_loss(const std::vector<Tensor>& stage_probs, const std::vector<int>& labels, const LossOptions& opts) {
    if (stage_probs.empty()) throw InvalidArgument("total_loss: need at least one stage");
    LossBreakdown out;
    out.per_stage.reserve(stage_probs.size());
    for (const Tensor& probs : stage_probs) {
        out.per_stage.push_back(stage_loss(probs, labels, opts));
        out.total += out.per_stage.back().combined;
    }
    return out;
}

std::vector<Tensor> total_loss_backward(const std::vector<Tensor>& stage_probs, const std::vector<int>& labels,
                                        const LossOptions& opts, double upstream) {
    if (stage_probs.empty()) throw InvalidArgument("total_loss: need at least one stage");
    std::vector<Tensor> grads;
    grads.reserve(stage_probs.size());
    for (const Tensor& probs : stage_probs) {
        Tensor g = cross_entropy_backward(probs, labels, opts.ce_norm, upstream);
        if (opts.lambda != 0.0) {
            Tensor gt = tmse_backward(probs, opts.tau, opts.tmse_detach_previous, upstream * opts.lambda);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += gt[i];
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

}  // namespace mstcn
