#pragma once

#include <vector>

#include "mstcn/tensor.hpp"

namespace mstcn {

// Cross-entropy normalization. `paper` divides by T*C; `conventional`
// divides by T only.
enum class CeNorm { paper, conventional };

const char* to_string(CeNorm norm);
CeNorm ce_norm_from_string(const std::string& s);

struct LossOptions {
    double lambda = 0.15;
    double tau = 4.0;
    CeNorm ce_norm = CeNorm::paper;
    // Treat the previous sample's log-prob as a constant in the smoothing
    // term's gradient.
    bool tmse_detach_previous = true;
};

// Sample-wise cross entropy over probabilities. Probs are clamped at
// 1e-12 before the log.
double cross_entropy(const Tensor& probs, const std::vector<int>& labels, CeNorm norm = CeNorm::paper);

// dL/dprobs for cross_entropy.
Tensor cross_entropy_backward(const Tensor& probs, const std::vector<int>& labels, CeNorm norm = CeNorm::paper, double upstream = 1.0);

// Truncated mean squared error over adjacent log-probability differences:
// delta[t,c] = |log p[t,c] - log p[t-1,c]| clamped at tau, squared, summed
// over t = 2..T and all classes, divided by T*C.
double tmse(const Tensor& probs, double tau);

// dL/dprobs for tmse. With detach_previous the t-1 operand of each
// difference is held constant.
Tensor tmse_backward(const Tensor& probs, double tau, bool detach_previous = true, double upstream = 1.0);

struct StageLoss {
    double ce = 0.0;
    double tmse = 0.0;
    double combined = 0.0;
};

// combined = ce + lambda * tmse.
StageLoss stage_loss(const Tensor& probs, const std::vector<int>& labels, const LossOptions& opts);

struct LossBreakdown {
    std::vector<StageLoss> per_stage;
    double total = 0.0;
};

// Sum of per-stage combined losses over all stages.
LossBreakdown total_loss(const std::vector<Tensor>& stage_probs, const std::vector<int>& labels, const LossOptions& opts);

// dL/dprobs for every stage.
std::vector<Tensor> total_loss_backward(const std::vector<Tensor>& stage_probs, const std::vector<int>& labels,
                                        const LossOptions& opts, double upstream = 1.0);

}  // namespace mstcn
