#include "mstcn/adam.hpp"

#include <cmath>

#include "mstcn/errors.hpp"

namespace mstcn {

void AdamConfig::validate() const {
    if (lr <= 0.0) throw InvalidArgument("adam: lr must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw InvalidArgument("adam: betas must lie in [0, 1)");
    }
    if (eps <= 0.0) throw InvalidArgument("adam: eps must be positive");
}

void adam_step(const std::vector<ParamTensor*>& params, const AdamConfig& cfg) {
    cfg.validate();
    for (ParamTensor* p : params) {
        p->step_count += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->step_count));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->step_count));
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double g = p->grad[i];
            p->adam_m[i] = cfg.beta1 * p->adam_m[i] + (1.0 - cfg.beta1) * g;
            p->adam_v[i] = cfg.beta2 * p->adam_v[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = p->adam_m[i] / bc1;
            const double v_hat = p->adam_v[i] / bc2;
            p->value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

}  // namespace mstcn
