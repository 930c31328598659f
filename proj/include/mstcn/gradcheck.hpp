#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mstcn/tensor.hpp"

namespace mstcn {

struct GradCheckReport {
    double max_rel_error = 0.0;
    int coords_checked = 0;
    std::string worst_param;
    int worst_index = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Compares analytic gradients against central differences.
//
//   loss:           deterministic scalar objective of the current param values
//   populate_grads: zeroes ParamTensor::grad and fills it analytically
//   h:              step, must lie in [1e-7, 1e-3]
//   max_coords:     0 checks every coordinate; otherwise a seeded random
//                   subset of at least 100 coordinates
//
// Relative error per coordinate uses max(|analytic|, |numeric|, 1e-8) as
// denominator. Throws CheckInvalidError if loss() is not reproducible.
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<void()>& populate_grads,
                           const std::vector<ParamTensor*>& params,
                           double h,
                           int max_coords = 0,
                           std::uint64_t subset_seed = 0);

}  // namespace mstcn
