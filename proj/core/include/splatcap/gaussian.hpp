// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

#include <array>
#include <vector>

namespace splatcap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kMaxShDegree = 3;
inline constexpr int kShCoeffCount = 16; // (kMaxShDegree + 1)^2

/// Per-channel SH coefficients; row = channel (R, G, B), column = basis index.
using ShCoeffs = Eigen::Matrix<double, 3, kShCoeffCount, Eigen::RowMajor>;

/// One optimizable Gaussian primitive. Every attribute is stored in its
/// unconstrained (pre-activation) form.
struct Splat {
    Vec3 position = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Vec4 rotation{1.0, 0.0, 0.0, 0.0}; // (w, x, y, z), normalized at point of use
    double opacity_logit = 0.0;
    ShCoeffs sh = ShCoeffs::Zero();

    bool operator==(const Splat&) const = default;
};

struct SplatCloud {
    std::vector<Splat> splats;
    int active_sh_degree = 0;

    std::size_t size() const noexcept { return splats.size(); }
    bool empty() const noexcept { return splats.empty(); }

    bool operator==(const SplatCloud&) const = default;
};

/// Rotation matrix of the normalized quaternion (w, x, y, z).
/// Throws InvalidParameter for a zero-norm quaternion.
Mat3 quaternion_to_rotation(const Vec4& q);

/// Σ = R · diag(exp(log_scale))² · Rᵀ.
Mat3 covariance3d(const Vec3& log_scale, const Vec4& rotation);

double activate_opacity(double opacity_logit);
double opacity_logit(double opacity);

inline constexpr double kShC0 = 0.28209479177387814;

/// Real SH basis values for `dir` (unit), all 16 entries; entries above the
/// requested degree are zero.
std::array<double, kShCoeffCount> sh_basis(const Vec3& dir, int degree);

/// Jacobian of sh_basis with respect to the (unnormalized treatment of the)
/// direction components: row k = d basis_k / d(x, y, z).
std::array<Vec3, kShCoeffCount> sh_basis_gradient(const Vec3& dir, int degree);

/// View-dependent color: SH(dir) + 0.5, clamped below at 0.
Vec3 eval_sh(const ShCoeffs& sh, const Vec3& view_dir, int degree);

/// Number of coefficients per channel used at `degree`.
constexpr int sh_coeffs_for_degree(int degree) { return (degree + 1) * (degree + 1); }

bool is_finite(const Splat& splat);

} // namespace splatcap
