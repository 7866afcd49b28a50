#include "trimodal/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trimodal/errors.hpp"

namespace trimodal {

std::vector<Vec3> GaussianCloud::positions() const {
    std::vector<Vec3> out;
    out.reserve(gaussians.size());
    for (const auto& g : gaussians) out.push_back(g.position);
    return out;
}

GaussianCloud activate(const std::vector<RawGaussianRecord>& records) {
    GaussianCloud cloud;
    cloud.gaussians.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        Gaussian g;
        g.position = r.position;
        const double x = r.opacity_logit;
        g.opacity = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        for (int c = 0; c < 3; ++c) {
            g.color[c] = std::clamp(kShC0 * r.sh_dc[c] + 0.5, 0.0, 1.0);
            g.scale[c] = std::exp(r.log_scale[c]);
        }
        const auto& q = r.rotation;
        const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        if (!(n >= 1e-12)) {
            throw DegenerateInputError("activate: record " + std::to_string(i) + " has a zero-norm rotation quaternion");
        }
        for (int c = 0; c < 4; ++c) g.rotation[c] = q[c] / n;
        cloud.gaussians.push_back(g);
    }
    return cloud;
}

Mat3 rotation_from_quat(const Quat& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    return Mat3{{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
                 {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
                 {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

Mat3 covariance_from_sq(const Vec3& scale, const Quat& q) {
    for (double s : scale) {
        if (!(s > 0.0)) throw ContractError("covariance_from_sq: scale must be strictly positive");
    }
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (std::abs(n - 1.0) > 1e-6) {
        throw ContractError("covariance_from_sq: quaternion norm " + std::to_string(n) + " is not 1");
    }
    const Mat3 r = rotation_from_quat(q);
    // M = R S, Sigma = M M^T
    Mat3 m{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] = r[i][j] * scale[j];
    Mat3 sigma{};
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += m[i][k] * m[j][k];
            sigma[i][j] = s;
            sigma[j][i] = s;
        }
    }
    return sigma;
}

Mat3 cholesky(const Mat3& a) {
    Mat3 l{};
    for (int j = 0; j < 3; ++j) {
        double d = a[j][j];
        for (int k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
        if (!(d > 0.0)) throw NumericError("cholesky: matrix is not positive definite");
        l[j][j] = std::sqrt(d);
        for (int i = j + 1; i < 3; ++i) {
            double s = a[i][j];
            for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            l[i][j] = s / l[j][j];
        }
    }
    return l;
}

double gaussian_density(const Vec3& mu, const Mat3& sigma, const Vec3& x) {
    const Mat3 l = cholesky(sigma);
    // Solve L y = (x - mu); Mahalanobis distance is |y|^2.
    Vec3 y{};
    for (int i = 0; i < 3; ++i) {
        double s = x[i] - mu[i];
        for (int k = 0; k < i; ++k) s -= l[i][k] * y[k];
        y[i] = s / l[i][i];
    }
    const double m = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    return std::exp(-0.5 * m);
}

GaussianCloud normalize_cloud(const GaussianCloud& cloud) {
    if (cloud.gaussians.empty()) throw ContractError("normalize_cloud: empty cloud");
    Vec3 c{};
    for (const auto& g : cloud.gaussians)
        for (int k = 0; k < 3; ++k) c[k] += g.position[k];
    for (auto& v : c) v /= static_cast<double>(cloud.size());
    double r2 = 0.0;
    for (const auto& g : cloud.gaussians) {
        double d = 0.0;
        for (int k = 0; k < 3; ++k) d += (g.position[k] - c[k]) * (g.position[k] - c[k]);
        r2 = std::max(r2, d);
    }
    const double radius = std::sqrt(r2);
    if (radius < 1e-12) throw DegenerateInputError("normalize_cloud: all points coincide");
    GaussianCloud out = cloud;
    for (auto& g : out.gaussians) {
        for (int k = 0; k < 3; ++k) {
            g.position[k] = (g.position[k] - c[k]) / radius;
            g.scale[k] /= radius;
        }
    }
    return out;
}

}  // namespace trimodal
