#include "mstcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mstcn/errors.hpp"
#include "mstcn/rng.hpp"

namespace mstcn {

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<void()>& populate_grads,
                           const std::vector<ParamTensor*>& params,
                           double h,
                           int max_coords,
                           std::uint64_t subset_seed) {
    if (h < 1e-7 || h > 1e-3) throw InvalidArgument("grad_check: h must lie in [1e-7, 1e-3]");
    if (params.empty()) throw InvalidArgument("grad_check: no parameters");

    const double first = loss();
    if (loss() != first) throw CheckInvalidError("grad_check: objective is not deterministic");

    populate_grads();

    // Flat coordinate list (param index, offset).
    std::vector<std::pair<int, std::size_t>> coords;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        for (std::size_t i = 0; i < params[pi]->size(); ++i) {
            coords.emplace_back(static_cast<int>(pi), i);
        }
    }
    if (max_coords > 0 && static_cast<std::size_t>(max_coords) < coords.size()) {
        if (max_coords < 100) throw InvalidArgument("grad_check: coordinate subset must be >= 100");
        Rng rng(subset_seed);
        rng.shuffle(coords);
        coords.resize(static_cast<std::size_t>(max_coords));
    }

    GradCheckReport report;
    report.coords_checked = static_cast<int>(coords.size());
    for (const auto& [pi, i] : coords) {
        ParamTensor& p = *params[static_cast<std::size_t>(pi)];
        const double saved = p.value[i];

        p.value[i] = saved + h;
        const double plus = loss();
        p.value[i] = saved - h;
        const double minus = loss();
        p.value[i] = saved;

        const double numeric = (plus - minus) / (2.0 * h);
        const double analytic = p.grad[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        const double rel = std::abs(analytic - numeric) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_param = p.name;
            report.worst_index = static_cast<int>(i);
            report.worst_analytic = analytic;
            report.worst_numeric = numeric;
        }
    }
    return report;
}

}  // namespace mstcn
