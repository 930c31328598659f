#pragma once

#include <vector>

#include "mstcn/tensor.hpp"

namespace mstcn {

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

// One Adam update with bias correction over the current gradients.
// Gradients are left untouched; the caller zeroes them before the next
// accumulation pass.
void adam_step(const std::vector<ParamTensor*>& params, const AdamConfig& cfg);

}  // namespace mstcn
