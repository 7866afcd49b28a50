#include "trimodal/optim.hpp"

#include <cmath>

#include "trimodal/errors.hpp"

namespace trimodal {

void adamw_step(ParamSet& params, AdamState& state, const AdamWOptions& opt) {
    for (const auto& [name, p] : params) {
        if (!p.grad) throw ContractError("adamw_step: parameter '" + name + "' has no gradient");
        if (p.grad->size() != p.values.size()) {
            throw DimensionError("adamw_step: gradient of '" + name + "' has the wrong size");
        }
    }
    const std::uint64_t t = state.step + 1;
    const double corr1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    const double corr2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
    for (auto& [name, p] : params) {
        auto& mom = state.moments[name];
        if (mom.m.empty()) {
            mom.m.assign(p.values.size(), 0.0);
            mom.v.assign(p.values.size(), 0.0);
        }
        const bool decay = opt.weight_decay != 0.0 && (!opt.decay_matrices_only || p.shape.size() >= 2);
        const double keep = decay ? 1.0 - opt.lr * opt.weight_decay : 1.0;
        const auto& g = *p.grad;
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            mom.m[i] = opt.beta1 * mom.m[i] + (1.0 - opt.beta1) * g[i];
            mom.v[i] = opt.beta2 * mom.v[i] + (1.0 - opt.beta2) * g[i] * g[i];
            const double mhat = mom.m[i] / corr1;
            const double vhat = mom.v[i] / corr2;
            p.values[i] = p.values[i] * keep - opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
        }
    }
    state.step = t;
}

}  // namespace trimodal
