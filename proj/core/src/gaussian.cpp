// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/gaussian.hpp"

#include "splatcap/error.hpp"

#include <cmath>

namespace splatcap {

namespace {

constexpr double kShC1 = 0.4886025119029199;
constexpr std::array<double, 5> kShC2 = {1.0925484305920792, -1.0925484305920792,
                                         0.31539156525252005, -1.0925484305920792,
                                         0.5462742152960396};
constexpr std::array<double, 7> kShC3 = {-0.5900435899266435, 2.890611442640554,
                                         -0.4570457994644658, 0.3731763325901154,
                                         -0.4570457994644658, 1.445305721320277,
                                         -0.5900435899266435};

void check_degree(int degree) {
    if (degree < 0 || degree > kMaxShDegree) {
        throw InvalidParameter("sh degree must be in [0, 3], got " + std::to_string(degree));
    }
}

} // namespace

Mat3 quaternion_to_rotation(const Vec4& q) {
    const double norm = q.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw InvalidParameter("rotation quaternion has zero or non-finite norm");
    }
    const Vec4 n = q / norm;
    const double w = n[0], x = n[1], y = n[2], z = n[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Mat3 covariance3d(const Vec3& log_scale, const Vec4& rotation) {
    const Mat3 r = quaternion_to_rotation(rotation);
    const Vec3 s = log_scale.array().exp();
    const Mat3 m = r * s.asDiagonal();
    Mat3 cov = m * m.transpose();
    // Force exact symmetry; the product is symmetric only up to rounding.
    cov(1, 0) = cov(0, 1);
    cov(2, 0) = cov(0, 2);
    cov(2, 1) = cov(1, 2);
    return cov;
}

double activate_opacity(double logit) {
    if (logit >= 0.0) {
        return 1.0 / (1.0 + std::exp(-logit));
    }
    const double e = std::exp(logit);
    return e / (1.0 + e);
}

double opacity_logit(double opacity) { return std::log(opacity / (1.0 - opacity)); }

std::array<double, kShCoeffCount> sh_basis(const Vec3& dir, int degree) {
    check_degree(degree);
    std::array<double, kShCoeffCount> b{};
    b[0] = kShC0;
    if (degree < 1) {
        return b;
    }
    const double x = dir.x(), y = dir.y(), z = dir.z();
    b[1] = -kShC1 * y;
    b[2] = kShC1 * z;
    b[3] = -kShC1 * x;
    if (degree < 2) {
        return b;
    }
    const double xx = x * x, yy = y * y, zz = z * z;
    b[4] = kShC2[0] * x * y;
    b[5] = kShC2[1] * y * z;
    b[6] = kShC2[2] * (2.0 * zz - xx - yy);
    b[7] = kShC2[3] * x * z;
    b[8] = kShC2[4] * (xx - yy);
    if (degree < 3) {
        return b;
    }
    b[9] = kShC3[0] * y * (3.0 * xx - yy);
    b[10] = kShC3[1] * x * y * z;
    b[11] = kShC3[2] * y * (4.0 * zz - xx - yy);
    b[12] = kShC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = kShC3[4] * x * (4.0 * zz - xx - yy);
    b[14] = kShC3[5] * z * (xx - yy);
    b[15] = kShC3[6] * x * (xx - 3.0 * yy);
    return b;
}

std::array<Vec3, kShCoeffCount> sh_basis_gradient(const Vec3& dir, int degree) {
    check_degree(degree);
    std::array<Vec3, kShCoeffCount> g;
    for (auto& v : g) {
        v.setZero();
    }
    if (degree < 1) {
        return g;
    }
    const double x = dir.x(), y = dir.y(), z = dir.z();
    g[1] = Vec3(0.0, -kShC1, 0.0);
    g[2] = Vec3(0.0, 0.0, kShC1);
    g[3] = Vec3(-kShC1, 0.0, 0.0);
    if (degree < 2) {
        return g;
    }
    const double xx = x * x, yy = y * y, zz = z * z;
    g[4] = kShC2[0] * Vec3(y, x, 0.0);
    g[5] = kShC2[1] * Vec3(0.0, z, y);
    g[6] = kShC2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
    g[7] = kShC2[3] * Vec3(z, 0.0, x);
    g[8] = kShC2[4] * Vec3(2.0 * x, -2.0 * y, 0.0);
    if (degree < 3) {
        return g;
    }
    g[9] = kShC3[0] * Vec3(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0);
    g[10] = kShC3[1] * Vec3(y * z, x * z, x * y);
    g[11] = kShC3[2] * Vec3(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
    g[12] = kShC3[3] * Vec3(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
    g[13] = kShC3[4] * Vec3(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
    g[14] = kShC3[5] * Vec3(2.0 * x * z, -2.0 * y * z, xx - yy);
    g[15] = kShC3[6] * Vec3(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0);
    return g;
}

Vec3 eval_sh(const ShCoeffs& sh, const Vec3& view_dir, int degree) {
    const auto basis = sh_basis(view_dir, degree);
    const int n = sh_coeffs_for_degree(degree);
    Vec3 rgb;
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) {
            acc += sh(c, k) * basis[k];
        }
        rgb[c] = std::max(acc + 0.5, 0.0);
    }
    return rgb;
}

bool is_finite(const Splat& s) {
    return s.position.allFinite() && s.log_scale.allFinite() && s.rotation.allFinite() &&
           std::isfinite(s.opacity_logit) && s.sh.allFinite();
}

} // namespace splatcap
