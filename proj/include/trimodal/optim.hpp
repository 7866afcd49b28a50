#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trimodal/tensor.hpp"

namespace trimodal {

struct AdamWOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    // Decay only tensors with two or more extents (weight matrices). Biases,
    // layer-norm gains and scalars such as the log temperature are left alone.
    bool decay_matrices_only = true;
};

struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;
};

struct AdamState {
    std::map<std::string, AdamMoments> moments;
    std::uint64_t step = 0;
};

// One AdamW update. Weight decay is applied to the parameter directly
// (p *= 1 - lr * wd) before the bias-corrected Adam step and never enters
// the moments. Throws ContractError naming the first parameter without a
// gradient.
void adamw_step(ParamSet& params, AdamState& state, const AdamWOptions& opt);

}  // namespace trimodal
