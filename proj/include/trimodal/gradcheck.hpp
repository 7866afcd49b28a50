#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "trimodal/tape.hpp"
#include "trimodal/tensor.hpp"

namespace trimodal {

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h for every coordinate of x.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double h = 1e-5);

// Relative error with a floor on the denominator so that gradients that are
// numerically zero are compared absolutely.
double relative_error(double analytic, double numeric, double floor = 1e-5);

struct GradCheckReport {
    std::string name;
    std::size_t coordinates = 0;
    std::size_t skipped = 0;  // coordinates sitting on a kink (max pool, relu)
    double max_rel_error = 0.0;
    std::string worst;  // parameter path and flat index of the worst coordinate
};

// Builds the loss on a fresh tape from `params`, runs backward, then compares
// `coords` randomly chosen parameter coordinates (spread across all tensors
// that require grad) with central differences. Coordinates where steps h and
// h/2 disagree sit on a kink; they are counted and replaced by the next
// candidate.
using LossBuilder = std::function<Var(Tape&, ParamSet&)>;
GradCheckReport check_param_gradients(const std::string& name, ParamSet& params,
                                      const LossBuilder& build, std::size_t coords,
                                      std::uint64_t seed, double h = 1e-5);

}  // namespace trimodal
