#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "trimodal/config.hpp"
#include "trimodal/gaussian.hpp"
#include "trimodal/model.hpp"
#include "trimodal/tensor.hpp"

namespace trimodal::test {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool grad = false) {
    Tensor t(std::move(shape), 0.0, grad);
    for (auto& v : t.values) v = uniform(rng, lo, hi);
    return t;
}

inline std::vector<double> unit_vector(std::size_t d, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(d);
    double s = 0.0;
    for (auto& x : v) {
        x = n(rng);
        s += x * x;
    }
    for (auto& x : v) x /= std::sqrt(s);
    return v;
}

inline Tensor unit_rows(std::size_t rows, std::size_t d, Rng& rng) {
    Tensor t(Shape{rows, d});
    for (std::size_t r = 0; r < rows; ++r) {
        const auto v = unit_vector(d, rng);
        std::copy(v.begin(), v.end(), t.values.begin() + static_cast<std::ptrdiff_t>(r * d));
    }
    return t;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Random cloud with well separated, tie-free positions.
inline GaussianCloud random_cloud(std::size_t n, Rng& rng) {
    GaussianCloud c;
    for (std::size_t i = 0; i < n; ++i) {
        Gaussian g;
        g.position = {uniform(rng), uniform(rng), uniform(rng)};
        g.opacity = uniform(rng, 0.05, 0.95);
        g.color = {uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)};
        g.scale = {uniform(rng, 0.01, 0.1), uniform(rng, 0.01, 0.1), uniform(rng, 0.01, 0.1)};
        Quat q{uniform(rng), uniform(rng), uniform(rng), uniform(rng)};
        const double qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        for (auto& x : q) x /= qn;
        g.rotation = q;
        c.gaussians.push_back(g);
    }
    return c;
}

// Small model: every component enabled, runs in milliseconds.
inline ModelConfig tiny_model() {
    ModelConfig m;
    auto& t = m.tokenizer;
    t.sample_count = 32;
    t.patch_count = 4;
    t.patch_size = 4;
    t.spatial_widths = {8, 8, 8};
    t.opacity_widths = {4, 4, 4};
    t.color_widths = {4, 4, 4};
    t.scale_widths = {4, 4, 4};
    t.rotation_widths = {4, 4, 4};
    t.fused_width = 8;
    t.blocks = 1;
    t.heads = 2;
    t.mlp_ratio = 2;
    t.embed_dim = 16;
    m.teacher.hidden = 8;
    m.teacher.width = 8;
    m.projector.layers = 2;
    m.projector.queries = 2;
    m.projector.heads = 2;
    m.projector.mlp_ratio = 2;
    m.sync();
    return m;
}

// Training config over a 4-class synthetic set sized for unit tests.
inline TrainConfig tiny_train_config() {
    TrainConfig c;
    c.model = tiny_model();
    c.data.classes = 4;
    c.data.train_per_class = 4;
    c.data.test_per_class = 3;
    c.data.gaussians = 32;
    c.data.dim = 16;
    c.data.views = 3;
    c.batch_size = 4;
    c.steps = 12;
    c.optim.lr = 1e-3;
    c.validate();
    return c;
}

}  // namespace trimodal::test
