#pragma once

#include <cstdint>
#include <vector>

#include "trimodal/gradcheck.hpp"

namespace trimodal {

struct GradSuiteOptions {
    std::size_t coordinates = 120;
    double h = 1e-5;
    double tolerance = 1e-4;
};

// Finite-difference checks over small instances of every trainable
// component: branch MLPs, fusion MLP, teacher-guidance block, view fusion,
// text projector, InfoNCE and the total loss.
std::vector<GradCheckReport> run_gradient_suite(std::uint64_t seed, const GradSuiteOptions& opt = {});

bool suite_passed(const std::vector<GradCheckReport>& reports, const GradSuiteOptions& opt = {});

}  // namespace trimodal
