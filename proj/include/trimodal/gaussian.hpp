#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace trimodal {

using Vec3 = std::array<double, 3>;
using Quat = std::array<double, 4>;  // (w, x, y, z)
using Mat3 = std::array<std::array<double, 3>, 3>;

// One vertex of a 3DGS export before activation.
struct RawGaussianRecord {
    Vec3 position{};
    double opacity_logit = 0.0;
    Vec3 sh_dc{};
    Vec3 log_scale{};
    Quat rotation{};
};

// Activated Gaussian: opacity in [0,1], color in [0,1]^3, positive scale, unit quaternion.
struct Gaussian {
    Vec3 position{};
    double opacity = 0.0;
    Vec3 color{};
    Vec3 scale{};
    Quat rotation{1.0, 0.0, 0.0, 0.0};

    bool operator==(const Gaussian&) const = default;
};

struct GaussianCloud {
    std::vector<Gaussian> gaussians;

    std::size_t size() const { return gaussians.size(); }
    std::vector<Vec3> positions() const;
    bool operator==(const GaussianCloud&) const = default;
};

// Zeroth-order real spherical harmonic, 1 / (2 sqrt(pi)).
inline constexpr double kShC0 = 0.28209479177387814;

// sigmoid(opacity), clamp(kShC0 * dc + 0.5, 0, 1), exp(log_scale), q / |q|.
// A quaternion with norm below 1e-12 raises DegenerateInputError naming the record.
GaussianCloud activate(const std::vector<RawGaussianRecord>& records);

Mat3 rotation_from_quat(const Quat& q);

// Sigma = R S S^T R^T. Requires s > 0 and |q| = 1 within 1e-6.
Mat3 covariance_from_sq(const Vec3& scale, const Quat& q);

// Unnormalized kernel exp(-1/2 (x-mu)^T Sigma^-1 (x-mu)). Throws NumericError
// when sigma is not positive definite.
double gaussian_density(const Vec3& mu, const Mat3& sigma, const Vec3& x);

// Cholesky factor L with sigma = L L^T; throws NumericError if sigma is not SPD.
Mat3 cholesky(const Mat3& sigma);

// Centers positions on their centroid and divides positions and scales by the
// maximum radius. Throws DegenerateInputError when all points coincide.
GaussianCloud normalize_cloud(const GaussianCloud& cloud);

}  // namespace trimodal
