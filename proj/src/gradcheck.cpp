#include "trimodal/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace trimodal {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double h) {
    Tensor grad(x.shape, 0.0);
    Tensor probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = x.values[i];
        probe.values[i] = orig + h;
        const double up = f(probe);
        probe.values[i] = orig - h;
        const double down = f(probe);
        probe.values[i] = orig;
        grad.values[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_param_gradients(const std::string& name, ParamSet& params,
                                      const LossBuilder& build, std::size_t coords,
                                      std::uint64_t seed, double h) {
    params.zero_grad();
    {
        Tape tape;
        Var loss = build(tape, params);
        tape.backward(loss);
    }
    auto eval = [&]() {
        Tape tape;
        return build(tape, params).item();
    };

    std::vector<std::pair<std::string, std::size_t>> pool;
    for (auto& [pname, t] : params) {
        if (!t.requires_grad) continue;
        for (std::size_t i = 0; i < t.numel(); ++i) pool.emplace_back(pname, i);
    }
    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);

    GradCheckReport rep;
    rep.name = name;
    for (const auto& [pname, idx] : pool) {
        if (rep.coordinates == coords) break;
        Tensor& t = params.at(pname);
        const double analytic = t.grad ? (*t.grad)[idx] : 0.0;
        const double orig = t.values[idx];
        auto central = [&](double step) {
            t.values[idx] = orig + step;
            const double up = eval();
            t.values[idx] = orig - step;
            const double down = eval();
            t.values[idx] = orig;
            return (up - down) / (2.0 * step);
        };
        const double numeric = central(h);
        if (relative_error(numeric, central(0.5 * h)) > 1e-4) {
            ++rep.skipped;
            continue;
        }
        ++rep.coordinates;
        const double err = relative_error(analytic, numeric);
        if (err >= rep.max_rel_error) {
            rep.max_rel_error = err;
            rep.worst = pname + "[" + std::to_string(idx) + "] analytic=" + std::to_string(analytic) +
                        " numeric=" + std::to_string(numeric);
        }
    }
    return rep;
}

}  // namespace trimodal
