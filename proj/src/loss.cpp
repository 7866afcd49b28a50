#include "trimodal/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trimodal/errors.hpp"

namespace trimodal {

void init_loss(ParamSet& ps, const LossParams& lp) {
    if (!(lp.init_temperature > 0.0)) throw ContractError("init_loss: temperature must be positive");
    if (lp.lambda_text < 0.0 || lp.lambda_image < 0.0) throw ContractError("init_loss: balance weights must be >= 0");
    ps.add(kLogTemperature, Tensor(Shape{1}, std::log(lp.init_temperature)));
}

namespace {

void require_unit_rows(const char* what, Var f) {
    const std::size_t r = f.rows(), c = f.cols();
    const auto& v = f.value();
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += v[i * c + j] * v[i * c + j];
        if (std::abs(std::sqrt(s) - 1.0) > 1e-6) {
            throw ContractError(std::string("info_nce: row ") + std::to_string(i) + " of " + what +
                                " is not unit norm (|x| = " + std::to_string(std::sqrt(s)) + ")");
        }
    }
}

}  // namespace

Var info_nce(Var f1, Var f2, Var log_temperature, bool symmetric) {
    if (f1.shape() != f2.shape() || f1.rows() == 0) {
        throw ContractError("info_nce: batches " + shape_str(f1.shape()) + " and " + shape_str(f2.shape()) +
                            " are not aligned");
    }
    if (log_temperature.numel() != 1) throw ContractError("info_nce: temperature must be a scalar");
    require_unit_rows("F1", f1);
    require_unit_rows("F2", f2);
    const std::size_t b = f1.rows();
    std::vector<std::size_t> diag(b);
    std::iota(diag.begin(), diag.end(), std::size_t{0});
    Var inv_tau = exp(neg(log_temperature));
    Var logits = scale_by(matmul(f1, transpose(f2)), inv_tau);
    Var forward = cross_entropy_rows(logits, diag);
    if (!symmetric) return forward;
    Var backward = cross_entropy_rows(transpose(logits), diag);
    return scale(add(forward, backward), 0.5);
}

Var info_nce(Var f1, Var f2, double tau, bool symmetric) {
    if (!(tau > 0.0)) throw ContractError("info_nce: temperature must be positive, got " + std::to_string(tau));
    return info_nce(f1, f2, f1.tape().constant(Shape{1}, {std::log(tau)}), symmetric);
}

LossTerms total_loss(Var g3d_text, Var text, Var g3d_image, Var image_mv, Var log_temperature,
                     const LossParams& lp) {
    const std::size_t b = g3d_text.rows();
    if (text.rows() != b || g3d_image.rows() != b || image_mv.rows() != b) {
        throw ContractError("total_loss: batch sizes differ (" + std::to_string(g3d_text.rows()) + ", " +
                            std::to_string(text.rows()) + ", " + std::to_string(g3d_image.rows()) + ", " +
                            std::to_string(image_mv.rows()) + ")");
    }
    LossTerms t;
    t.text = info_nce(g3d_text, text, log_temperature, lp.symmetric);
    t.image = info_nce(g3d_image, image_mv, log_temperature, lp.symmetric);
    t.total = add(scale(t.text, lp.lambda_text), scale(t.image, lp.lambda_image));
    return t;
}

void clamp_temperature(ParamSet& ps) {
    auto& lt = ps.at(kLogTemperature).values[0];
    lt = std::clamp(lt, std::log(kMinTemperature), std::log(kMaxTemperature));
}

double temperature(const ParamSet& ps) { return std::exp(ps.at(kLogTemperature).values[0]); }

}  // namespace trimodal
