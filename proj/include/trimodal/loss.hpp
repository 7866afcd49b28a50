#pragma once

#include "trimodal/tape.hpp"
#include "trimodal/tensor.hpp"

namespace trimodal {

inline constexpr double kMinTemperature = 0.01;
inline constexpr double kMaxTemperature = 100.0;
inline constexpr const char* kLogTemperature = "loss.log_temperature";

struct LossParams {
    double lambda_text = 0.5;
    double lambda_image = 0.5;
    bool symmetric = true;
    double init_temperature = 0.07;
};

// Registers the learnable scalar "loss.log_temperature" = log(init_temperature).
void init_loss(ParamSet& ps, const LossParams& lp);

// In-batch InfoNCE over matched unit rows:
//   -(1/B) sum_i log softmax_j(F1_i . F2_j / tau)[i]
// With `symmetric` the loss is the mean of the F1->F2 and F2->F1 directions.
// Rows off the unit sphere by more than 1e-6 raise ContractError.
Var info_nce(Var f1, Var f2, Var log_temperature, bool symmetric);
// Fixed positive temperature; tau <= 0 raises ContractError.
Var info_nce(Var f1, Var f2, double tau, bool symmetric);

struct LossTerms {
    Var total;
    Var text;   // L(F_G^T, F_T)
    Var image;  // L(F_G^I, F_I^mv)
};

// lambda_T * L(F_G^T, F_T) + lambda_I * L(F_G^I, F_I^mv). No text-image term.
LossTerms total_loss(Var g3d_text, Var text, Var g3d_image, Var image_mv, Var log_temperature,
                     const LossParams& lp);

// Projects tau back into [0.01, 100] by clamping the log temperature.
void clamp_temperature(ParamSet& ps);
double temperature(const ParamSet& ps);

}  // namespace trimodal
